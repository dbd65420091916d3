//! Error classes and their process exit codes.

use std::fmt;

use serde::Serialize;

/// Each class owns one exit code. The numbers are part of the interface and
/// must not be reassigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Anything not covered below, including I/O failures on outputs.
    Generic,
    /// The pipeline produced no usable or no consistent representation.
    ParseFailure,
    /// The corpus could not realize the representation.
    AssemblyError,
    /// The document failed schema verification.
    EmitError,
    /// Bad configuration, missing credentials or an unreachable backend.
    Config,
    /// An input file is missing, unreadable or malformed.
    ReadError,
    /// A scenario names a map the corpus does not provide.
    MapMismatch,
}

impl ErrorClass {
    pub fn code(self) -> u8 {
        match self {
            ErrorClass::Generic => 1,
            ErrorClass::ParseFailure => 2,
            ErrorClass::AssemblyError => 3,
            ErrorClass::EmitError => 4,
            ErrorClass::Config => 5,
            ErrorClass::ReadError => 6,
            ErrorClass::MapMismatch => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Generic => "generic",
            ErrorClass::ParseFailure => "parse_failure",
            ErrorClass::AssemblyError => "assembly_error",
            ErrorClass::EmitError => "emit_error",
            ErrorClass::Config => "config",
            ErrorClass::ReadError => "read_error",
            ErrorClass::MapMismatch => "map_mismatch",
        }
    }
}

/// An error tagged with its class, carried inside `anyhow::Error`.
#[derive(Debug)]
pub struct Classified {
    pub class: ErrorClass,
    pub source: anyhow::Error,
}

impl fmt::Display for Classified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.source))
    }
}

/// The error chain joined with `: `. Library errors often repeat their
/// cause in their own message, so a link already ending the previous one
/// is skipped.
pub fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for link in err.chain() {
        let text = link.to_string();
        if !prev.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        prev = text;
    }
    out
}

impl std::error::Error for Classified {}

pub fn classified(class: ErrorClass, source: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow::Error::new(Classified {
        class,
        source: source.into(),
    })
}

/// The class of an error chain; unclassified errors are generic.
pub fn class_of(err: &anyhow::Error) -> ErrorClass {
    err.chain()
        .find_map(|e| e.downcast_ref::<Classified>())
        .map_or(ErrorClass::Generic, |c| c.class)
}

pub trait ClassExt<T> {
    fn class(self, class: ErrorClass) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> ClassExt<T> for Result<T, E> {
    fn class(self, class: ErrorClass) -> anyhow::Result<T> {
        self.map_err(|e| classified(class, e))
    }
}

/// One-line JSON written to stderr on failure.
pub fn error_json(err: &anyhow::Error) -> String {
    let class = class_of(err);
    serde_json::json!({
        "error": class.name(),
        "code": class.code(),
        "message": render(err),
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    const ALL: [ErrorClass; 7] = [
        ErrorClass::Generic,
        ErrorClass::ParseFailure,
        ErrorClass::AssemblyError,
        ErrorClass::EmitError,
        ErrorClass::Config,
        ErrorClass::ReadError,
        ErrorClass::MapMismatch,
    ];

    #[test]
    fn codes_are_distinct_and_nonzero() {
        let codes: BTreeSet<u8> = ALL.iter().map(|c| c.code()).collect();
        assert_eq!(codes.len(), ALL.len());
        assert!(!codes.contains(&0));
    }

    #[test]
    fn class_survives_context() {
        let err = Err::<(), _>(anyhow::anyhow!("boom"))
            .class(ErrorClass::MapMismatch)
            .map_err(|e| e.context("while running"))
            .unwrap_err();
        assert_eq!(class_of(&err), ErrorClass::MapMismatch);
        assert_eq!(class_of(&anyhow::anyhow!("plain")), ErrorClass::Generic);
    }

    #[test]
    fn repeated_causes_are_rendered_once() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let inner = anyhow::Error::new(io);
        let wrapped = inner.context("cannot read x: gone").context("loading");
        assert_eq!(render(&wrapped), "loading: cannot read x: gone");
    }

    #[test]
    fn stderr_json_names_the_class() {
        let err = classified(ErrorClass::ReadError, anyhow::anyhow!("truncated"));
        let v: serde_json::Value = serde_json::from_str(&error_json(&err)).unwrap();
        assert_eq!(v["error"], "read_error");
        assert_eq!(v["code"], 6);
        assert_eq!(v["message"], "truncated");
    }
}
