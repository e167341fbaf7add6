//! Batch front end for `potlab-core`: problem-file driven runs that write CSV,
//! JSON and SVG artifacts, and the verification suite.

pub mod commands;
pub mod plot;
pub mod verify;

use std::path::PathBuf;

use potlab_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// A failed run with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

/// Parses `a..b` (inclusive), `a,b,c`, or a single level; the result must be
/// nonempty and strictly increasing.
pub fn parse_levels(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let levels: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| format!("bad level range `{s}`"))?;
        let b: usize = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad level range `{s}`"))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| format!("bad level `{t}`")))
            .collect::<Result<_, _>>()?
    };
    if levels.is_empty() {
        return Err(format!("level list `{s}` is empty"));
    }
    if levels.windows(2).any(|p| p[1] <= p[0]) {
        return Err(format!("level list `{s}` is not strictly increasing"));
    }
    Ok(levels)
}

/// Creates the output directory and checks that it is writable.
pub fn prepare_out_dir(dir: &PathBuf) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".potlab-write-test");
    std::fs::write(&probe, b"")
        .and_then(|_| std::fs::remove_file(&probe))
        .map_err(|e| {
            Failure::config(format!(
                "output directory {} is not writable: {e}",
                dir.display()
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_levels("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_levels("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert_eq!(parse_levels("7").unwrap(), vec![7]);
        assert!(parse_levels("5..2").is_err());
        assert!(parse_levels("3,3").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::from(Error::Config("x".into())).code, EXIT_CONFIG);
        assert_eq!(Failure::from(Error::DegenerateWeight).code, EXIT_NUMERIC);
    }
}
