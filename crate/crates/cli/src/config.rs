//! Flat `key = value` config files and the canonical manifest text.
//!
//! A config file names long options without the leading dashes (`-` and
//! `_` are interchangeable). Its entries are spliced into the command line
//! right after the subcommand, so flags given on the command line win.
//! Boolean switches take `true` or `false`. The keys `version` and
//! `subcommand` are ignored, which lets a `manifest` be reused as a config.

use std::ffi::OsString;

use clap::{ArgAction, ArgMatches, Command};

/// Options that never appear in a manifest.
const NOT_RECORDED: &[&str] = &["config", "threads", "out", "help"];

pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected 'key = value'", no + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Returns `args` with the config entries inserted after the subcommand.
pub fn splice(cmd: &Command, args: Vec<OsString>, entries: &[(String, String)]) -> Result<Vec<OsString>, String> {
    let Some(pos) = args
        .iter()
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(args[pos].to_string_lossy().as_ref())
        .expect("position found it");
    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "version" || key == "subcommand" {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| format!("unknown config key '{key}' for {}", sub.get_name()))?;
        if key == "config" {
            return Err("config files cannot include other config files".into());
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => extra.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(format!("config key '{key}' expects true or false, got '{other}'")),
            }
        } else {
            extra.push(format!("--{key}={value}").into());
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}

/// `key = value` lines for every resolved option of the subcommand, sorted
/// by key, defaults included.
pub fn canonical(sub_name: &str, sub: &Command, m: &ArgMatches) -> String {
    let mut lines = vec![
        format!("version = {}", env!("CARGO_PKG_VERSION")),
        format!("subcommand = {sub_name}"),
    ];
    let mut keys: Vec<(String, String)> = Vec::new();
    for arg in sub.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        if NOT_RECORDED.contains(&long) {
            continue;
        }
        let id = arg.get_id().as_str();
        let value = match arg.get_action() {
            ArgAction::SetTrue => m.get_flag(id).to_string(),
            _ => match m.get_raw(id) {
                Some(vals) => vals
                    .map(|v| v.to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join(","),
                None => continue,
            },
        };
        keys.push((long.to_string(), value));
    }
    keys.sort();
    lines.extend(keys.into_iter().map(|(k, v)| format!("{k} = {v}")));
    lines.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let e = parse("# c\nn = 64\nseed=7 # trailing\n\npaper_faithful = true\n").unwrap();
        assert_eq!(
            e,
            vec![
                ("n".into(), "64".into()),
                ("seed".into(), "7".into()),
                ("paper-faithful".into(), "true".into())
            ]
        );
        assert!(parse("novalue\n").is_err());
        assert!(parse(" = 3\n").is_err());
    }

    #[test]
    fn finds_config_flag() {
        let a: Vec<OsString> = ["x", "denoise", "--config", "c.txt"].iter().map(Into::into).collect();
        assert_eq!(find_config(&a), Some("c.txt".into()));
        let b: Vec<OsString> = ["x", "--config=d.txt"].iter().map(Into::into).collect();
        assert_eq!(find_config(&b), Some("d.txt".into()));
    }
}
