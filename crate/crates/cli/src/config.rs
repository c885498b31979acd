//! `--config` files.
//!
//! A config file holds one table per subcommand whose keys are flag names
//! (dashes or underscores):
//!
//! ```toml
//! [train]
//! dim = 32
//! hidden = [128, 128]
//! shard-budget = 5
//! ```
//!
//! Entries become flags placed before the ones typed on the command line;
//! repeated flags resolve to the last occurrence, so explicit flags win.

use std::ffi::OsString;
use std::path::PathBuf;

use crate::CliError;

const SUBCOMMANDS: [&str; 7] = ["gen", "train", "evaluate", "rank", "simulate", "sweep", "serve"];

fn find_config(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn value_to_flags(flag: &str, value: &toml::Value) -> Result<Vec<String>, CliError> {
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(CliError::user(format!("config: unsupported value for {flag}: {other}"))),
        }
    };
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag.to_string()],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            vec![flag.to_string(), parts.join(",")]
        }
        v => vec![flag.to_string(), scalar(v)?],
    })
}

/// Returns `argv` with the config file's entries for the chosen subcommand
/// inserted right after the subcommand name.
pub fn merge_config_args(argv: &[OsString]) -> Result<Vec<OsString>, CliError> {
    let Some(path) = find_config(argv) else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::user(format!("config {}: {e}", path.display())))?;
    let doc: toml::Table = text.parse().map_err(|e| CliError::user(format!("config {}: {e}", path.display())))?;
    if let Some(bad) = doc.keys().find(|k| !SUBCOMMANDS.contains(&k.as_str())) {
        return Err(CliError::user(format!("config {}: unknown section [{bad}]", path.display())));
    }
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(argv.to_vec());
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    let mut injected = Vec::new();
    if let Some(section) = doc.get(&sub) {
        let table = section
            .as_table()
            .ok_or_else(|| CliError::user(format!("config {}: [{sub}] must be a table", path.display())))?;
        for (key, value) in table {
            let flag = format!("--{}", key.replace('_', "-"));
            injected.extend(value_to_flags(&flag, value)?);
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
