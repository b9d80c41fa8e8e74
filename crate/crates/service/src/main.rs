use clap::Parser;

/// Serve the eegchair pipeline over HTTP/JSON.
#[derive(Parser)]
#[command(name = "eegchair-server", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "EEGCHAIR_BIND", default_value = "127.0.0.1:8750")]
    bind: String,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(&args.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    eegchair_service::serve_until_signal(listener).await
}
