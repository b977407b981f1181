use clap::Parser;

fn main() -> anyhow::Result<()> {
    bcgp::cli::run(bcgp::cli::Cli::parse())
}
