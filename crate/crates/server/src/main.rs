use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use gallery_core::access::GlobalRole;
use gallery_server::{AppState, Config};
use gallery_store::migrate::MigrationRegistry;
use gallery_store::{Gallery, GalleryOptions};

#[derive(Parser)]
#[command(name = "gallery", version, about = "Versioned gallery of research models")]
struct Cli {
    /// Configuration file (key = value lines). Defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Register a user. The password is read from the first line of stdin
    /// unless given with --password.
    Adduser {
        name: String,
        #[arg(long, default_value = "author")]
        role: GlobalRole,
        #[arg(long)]
        display_name: Option<String>,
        #[arg(long)]
        email: Option<String>,
        #[arg(long)]
        password: Option<String>,
    },
    /// Migrate every stored document to another schema version.
    Migrate {
        #[arg(long)]
        target: u32,
        #[arg(long)]
        dry_run: bool,
    },
    /// Install the bundled example models as published versions.
    Seed {
        /// Owner of the installed models, instead of their authors.
        #[arg(long)]
        owner: Option<String>,
        /// Name recorded as approver in the audit log.
        #[arg(long, default_value = "admin")]
        approver: String,
    },
}

fn open(config: &Config) -> Result<Gallery, String> {
    let options = GalleryOptions { session_ttl: chrono::Duration::hours(config.session_ttl_hours), ..Default::default() };
    Gallery::open(&config.data_dir, options).map_err(|e| format!("cannot open {}: {e}", config.data_dir.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    match cli.command {
        Command::Serve => {
            let gallery = Arc::new(open(&config)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(config.listen_addr)
                    .await
                    .map_err(|e| format!("cannot listen on {}: {e}", config.listen_addr))?;
                tracing::info!(addr = %config.listen_addr, data = %config.data_dir.display(), "serving");
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                gallery_server::serve(listener, AppState::new(gallery, config.max_upload_bytes), shutdown)
                    .await
                    .map_err(|e| e.to_string())
            })
        }
        Command::Adduser { name, role, display_name, email, password } => {
            let password = match password {
                Some(p) => p,
                None => {
                    let mut line = String::new();
                    std::io::stdin().lock().read_line(&mut line).map_err(|e| e.to_string())?;
                    line.trim_end_matches(['\r', '\n']).to_owned()
                }
            };
            let gallery = open(&config)?;
            let display = display_name.unwrap_or_else(|| name.clone());
            let email = email.unwrap_or_else(|| format!("{name}@localhost"));
            let user = gallery.add_user(&name, &display, &email, role, &password).map_err(|e| e.to_string())?;
            println!("added {} ({})", user.username, user.global_role.as_str());
            Ok(())
        }
        Command::Migrate { target, dry_run } => {
            let gallery = open(&config)?;
            match gallery.migrate(&MigrationRegistry::builtin(), target, dry_run) {
                Ok(report) => {
                    print!("{report}");
                    Ok(())
                }
                Err(gallery_store::StoreError::MigrationFailed(reports)) => {
                    for r in &reports {
                        println!("{r}");
                    }
                    Err(format!("migration aborted, {} document(s) failed; the store is unchanged", reports.len()))
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Seed { owner, approver } => {
            let gallery = open(&config)?;
            let keys = gallery.seed(owner.as_deref(), &approver).map_err(|e| e.to_string())?;
            for k in &keys {
                println!("installed {k}");
            }
            if keys.is_empty() {
                println!("nothing to install");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gallery: {e}");
            ExitCode::FAILURE
        }
    }
}
