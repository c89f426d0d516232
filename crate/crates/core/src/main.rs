use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use wavesync::cli::{self, Cli};
use wavesync::{exec, Error};

fn fail(err: &Error, violations: Option<Vec<cli::Violation>>) -> ExitCode {
    let class = err.class();
    let mut body = json!({
        "error": err.kind(),
        "class": class.as_str(),
        "message": err.to_string(),
    });
    if let Some(v) = violations {
        body["violations"] = json!(v);
    }
    eprintln!("{body}");
    ExitCode::from(class.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Config(e.render().to_string().trim().to_owned());
            return fail(&err, None);
        }
    };
    exec::init_from_env();
    let config = match args.into_config() {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    let problems = cli::validate(&config);
    if !problems.is_empty() {
        let err = Error::Config(format!("{} invalid setting(s)", problems.len()));
        return fail(&err, Some(problems));
    }
    match cli::run(&config) {
        Ok(report) => {
            for f in report.files {
                println!("{}", config.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, None),
    }
}
