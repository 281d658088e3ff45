//! `key = value` configuration files merged into the argument list.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Turns the file into flag tokens. Keys may use `_` or `-`; `true`/`false`
/// values toggle switches.
pub fn config_tokens(text: &str, origin: &Path) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{}:{}: expected `key = value`", origin.display(), no + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key.is_empty() || key.starts_with('-') || key == "config" {
            return Err(CliError::usage(format!(
                "{}:{}: invalid key `{key}`",
                origin.display(),
                no + 1
            )));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config PATH` from `argv` and splices the file's flags in after
/// the subcommand, so flags given on the command line override them.
pub fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy().into_owned();
        if tok == "--" {
            break;
        }
        if tok == "--config" {
            if i + 1 >= argv.len() {
                return Err(CliError::usage("--config needs a path"));
            }
            path = Some(argv.remove(i + 1));
            argv.remove(i);
            continue;
        }
        if let Some(p) = tok.strip_prefix("--config=") {
            path = Some(OsString::from(p));
            argv.remove(i);
            continue;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let tokens = config_tokens(&text, path)?;
    let at = argv.len().min(2);
    argv.splice(at..at, tokens);
    Ok(argv)
}
