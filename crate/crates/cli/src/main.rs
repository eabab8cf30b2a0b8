//! `medshare`: seed data, manage roles and users, run services, query
//! locally and check the audit chain.
//!
//! Exit status is 0 on success, 1 on a domain error (machine code first on
//! stderr) and 2 on a usage error.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use medshare_core::audit::{tail, verify_chain};
use medshare_core::query::EngineConfig;
use medshare_core::rbac::RbacStore;
use medshare_core::store::{load_tables, save_tables};
use medshare_core::synth::{generate_dataset, GenError, GenSpec};
use medshare_core::token::{issue_token, verify_token, SigningKey};
use medshare_core::{Gateway, GuardConfig, QueryRegistry};
use medshare_services::config::{read_secret, ServiceConfig, ServiceKind};

#[derive(Parser)]
#[command(
    name = "medshare",
    version,
    about = "Privacy-guarded clinical query services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Seed(SeedArgs),
    /// Run one service until interrupted.
    Serve {
        #[arg(long)]
        kind: ServiceKind,
        #[arg(long)]
        config: PathBuf,
    },
    /// Manage user accounts.
    #[command(subcommand)]
    User(UserCommand),
    /// Grant a query to a role.
    Grant(GrantArgs),
    /// Revoke a query from a role.
    Revoke(GrantArgs),
    /// Run a query against a local dataset, printing the serialized result.
    Query(QueryArgs),
    /// Print the queries visible to a role or token.
    Catalog(CatalogArgs),
    /// Issue tokens.
    #[command(subcommand)]
    Token(TokenCommand),
    /// Inspect an audit log.
    #[command(subcommand)]
    Audit(AuditCommand),
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rows_patient: Option<usize>,
    #[arg(long)]
    rows_examination: Option<usize>,
    #[arg(long)]
    rows_clinicaldetection: Option<usize>,
    #[arg(long)]
    rows_doctor: Option<usize>,
    #[arg(long)]
    rows_prescription: Option<usize>,
    #[arg(long)]
    rows_medication: Option<usize>,
    #[arg(long)]
    rows_prescriptmed: Option<usize>,
}

#[derive(Subcommand)]
enum UserCommand {
    Add {
        #[arg(long)]
        rbac: PathBuf,
        #[arg(long)]
        username: String,
        #[arg(long)]
        password: String,
        #[arg(long = "role", required = true)]
        roles: Vec<String>,
    },
    List {
        #[arg(long)]
        rbac: PathBuf,
    },
}

#[derive(Args)]
struct GrantArgs {
    #[arg(long)]
    rbac: PathBuf,
    #[arg(long)]
    role: String,
    #[arg(long)]
    query: String,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    id: String,
    /// Query parameter as key=value. Repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, String)>,
    #[arg(long)]
    data: PathBuf,
    /// Role to act as.
    #[arg(long = "as")]
    role: String,
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value = "2018-01-01")]
    reference_date: NaiveDate,
    /// Grants file. The built-in grants are used when absent.
    #[arg(long)]
    rbac: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    #[arg(
        long = "as",
        conflicts_with = "token",
        required_unless_present = "token"
    )]
    role: Option<String>,
    #[arg(long, requires = "secret")]
    token: Option<String>,
    /// File holding the signing secret that issued `--token`.
    #[arg(long)]
    secret: Option<PathBuf>,
    #[arg(long)]
    rbac: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TokenCommand {
    Issue {
        #[arg(long)]
        user: String,
        #[arg(long)]
        password: String,
        #[arg(long)]
        rbac: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long, default_value_t = 900)]
        ttl: i64,
        #[arg(long, default_value = "default")]
        key_id: String,
    },
}

#[derive(Subcommand)]
enum AuditCommand {
    Verify {
        #[arg(long)]
        log: PathBuf,
    },
    Tail {
        #[arg(long)]
        log: PathBuf,
        #[arg(short = 'n', default_value_t = 10)]
        n: usize,
    },
}

fn parse_param(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {raw:?}"))
}

struct Failure {
    code: String,
    message: String,
    exit: u8,
}

impl Failure {
    fn domain(code: &str, message: impl ToString) -> Self {
        Self {
            code: code.to_string(),
            message: message.to_string(),
            exit: 1,
        }
    }

    fn usage(code: &str, message: impl ToString) -> Self {
        Self {
            exit: 2,
            ..Self::domain(code, message)
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Seed(args) => seed(args),
        Command::Serve { kind, config } => serve(kind, &config),
        Command::User(cmd) => user(cmd),
        Command::Grant(args) => grant(args, true),
        Command::Revoke(args) => grant(args, false),
        Command::Query(args) => query(args),
        Command::Catalog(args) => catalog(args),
        Command::Token(cmd) => token(cmd),
        Command::Audit(cmd) => audit(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}

fn print(bytes: &[u8]) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::domain("io_failure", e))
}

fn print_json<T: Serialize>(value: &T) -> Outcome {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::domain("internal", e))?;
    text.push('\n');
    print(text.as_bytes())
}

fn seed(a: SeedArgs) -> Outcome {
    let base = GenSpec::with_seed(a.seed);
    let spec = GenSpec {
        rows_patient: a.rows_patient.unwrap_or(base.rows_patient),
        rows_examination: a.rows_examination.unwrap_or(base.rows_examination),
        rows_clinicaldetection: a
            .rows_clinicaldetection
            .unwrap_or(base.rows_clinicaldetection),
        rows_doctor: a.rows_doctor.unwrap_or(base.rows_doctor),
        rows_prescription: a.rows_prescription.unwrap_or(base.rows_prescription),
        rows_medication: a.rows_medication.unwrap_or(base.rows_medication),
        rows_prescriptmed: a.rows_prescriptmed.unwrap_or(base.rows_prescriptmed),
        ..base
    };
    let tables = generate_dataset(&spec).map_err(|e| match e {
        GenError::InconsistentSpec(m) => Failure::usage("inconsistent_spec", m),
        other => Failure::domain("internal", other),
    })?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::domain("io_failure", e))?;
    save_tables(&tables, &a.out).map_err(|e| Failure::domain("io_failure", e))?;
    let counts = tables.row_counts();
    eprintln!(
        "wrote {} rows to {}",
        counts.iter().sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

fn serve(kind: ServiceKind, path: &Path) -> Outcome {
    let mut cfg = ServiceConfig::load(path).map_err(|e| Failure::domain("bad_config", e))?;
    if cfg.kind != kind {
        return Err(Failure::usage(
            "bad_config",
            format!(
                "--kind {kind} but {} configures {}",
                path.display(),
                cfg.kind
            ),
        ));
    }
    cfg.kind = kind;
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::domain("internal", e))?;
    runtime
        .block_on(medshare_services::serve(cfg))
        .map_err(|e| Failure::domain("startup_failed", e))
}

fn load_rbac(path: &Path) -> Result<RbacStore, Failure> {
    RbacStore::load_or_default(path).map_err(|e| Failure::domain(e.code(), e))
}

fn rbac_or_fixture(path: Option<&Path>) -> Result<RbacStore, Failure> {
    match path {
        Some(p) => load_rbac(p),
        None => Ok(RbacStore::default_fixture()),
    }
}

fn user(cmd: UserCommand) -> Outcome {
    match cmd {
        UserCommand::Add {
            rbac,
            username,
            password,
            roles,
        } => {
            let mut store = load_rbac(&rbac)?;
            let roles: BTreeSet<String> = roles.into_iter().collect();
            store
                .create_user(&username, &password, &roles)
                .map_err(|e| Failure::domain(e.code(), e))?;
            store.save(&rbac).map_err(|e| Failure::domain(e.code(), e))
        }
        UserCommand::List { rbac } => {
            let store = load_rbac(&rbac)?;
            let mut out = String::new();
            for u in store.users() {
                let roles: Vec<&str> = u.roles.iter().map(String::as_str).collect();
                out.push_str(&format!("{}\t{}\n", u.username, roles.join(",")));
            }
            print(out.as_bytes())
        }
    }
}

fn grant(a: GrantArgs, allow: bool) -> Outcome {
    let mut store = load_rbac(&a.rbac)?;
    let result = if allow {
        store.grant(&a.role, &a.query)
    } else {
        store.revoke(&a.role, &a.query)
    };
    result.map_err(|e| Failure::domain(e.code(), e))?;
    store
        .save(&a.rbac)
        .map_err(|e| Failure::domain(e.code(), e))
}

fn query(a: QueryArgs) -> Outcome {
    let rbac = rbac_or_fixture(a.rbac.as_deref())?;
    let tables = load_tables(&a.data).map_err(|e| Failure::domain("bad_dataset", e))?;
    let gateway = Gateway::new(
        QueryRegistry::canonical(GuardConfig::default()),
        rbac.into(),
        tables.into(),
        EngineConfig {
            reference_date: a.reference_date,
        },
    );
    let mut params = a.params;
    if let Some(f) = a.format {
        params.push((medshare_core::gateway::FORMAT_PARAM.to_string(), f));
    }
    let resp = gateway
        .run(&[a.role.as_str()], &a.id, &params)
        .map_err(|e| Failure::domain(e.code(), e))?;
    print(&resp.body)
}

#[derive(Serialize)]
struct CatalogLine<'a> {
    query_id: &'a str,
    description: &'a str,
    params: Vec<String>,
    url_path: String,
}

fn catalog(a: CatalogArgs) -> Outcome {
    let rbac = rbac_or_fixture(a.rbac.as_deref())?;
    let roles = match (a.role, a.token, a.secret) {
        (Some(role), _, _) => vec![role],
        (None, Some(token), Some(secret)) => {
            let secret = read_secret(&secret).map_err(|e| Failure::domain("bad_config", e))?;
            let key =
                SigningKey::new(secret, "default").map_err(|e| Failure::domain("bad_config", e))?;
            let now = chrono::Utc::now().timestamp();
            verify_token(&token, now, &key)
                .map_err(|e| Failure::domain(e.code(), e))?
                .roles
        }
        _ => {
            return Err(Failure::usage(
                "usage",
                "need --as or --token with --secret",
            ))
        }
    };
    let permitted = rbac.permitted_queries(&roles);
    let registry = QueryRegistry::canonical(GuardConfig::default());
    let lines: Vec<CatalogLine> = registry
        .definitions()
        .filter(|d| permitted.contains(&d.query_id))
        .map(|d| CatalogLine {
            query_id: &d.query_id,
            description: &d.description,
            params: d.params.iter().map(|p| p.name.clone()).collect(),
            url_path: d.url_path(),
        })
        .collect();
    print_json(&lines)
}

fn token(cmd: TokenCommand) -> Outcome {
    let TokenCommand::Issue {
        user,
        password,
        rbac,
        secret,
        ttl,
        key_id,
    } = cmd;
    let store = load_rbac(&rbac)?;
    let secret = read_secret(&secret).map_err(|e| Failure::domain("bad_config", e))?;
    let key = SigningKey::new(secret, key_id).map_err(|e| Failure::domain("bad_config", e))?;
    let now = chrono::Utc::now().timestamp();
    let token = issue_token(&user, &password, now, ttl, &key, &store).map_err(|e| match e {
        medshare_core::token::IssueError::Auth(_) => {
            Failure::domain("bad_credentials", "bad credentials")
        }
        other => Failure::usage("usage", other),
    })?;
    print(format!("{token}\n").as_bytes())
}

fn audit(cmd: AuditCommand) -> Outcome {
    match cmd {
        AuditCommand::Verify { log } => {
            let status = verify_chain(&log).map_err(|e| Failure::domain("io_failure", e))?;
            print(format!("{status}\n").as_bytes())?;
            match status {
                medshare_core::audit::ChainStatus::Intact { .. } => Ok(()),
                medshare_core::audit::ChainStatus::Broken { .. } => {
                    Err(Failure::domain("chain_broken", status))
                }
            }
        }
        AuditCommand::Tail { log, n } => {
            let entries = tail(&log, n).map_err(|e| Failure::domain("io_failure", e))?;
            let mut out = String::new();
            for e in entries {
                out.push_str(&e.to_line());
                out.push('\n');
            }
            print(out.as_bytes())
        }
    }
}
