//! Lexical path handling: no filesystem access, `~` resolved against a
//! caller-supplied home directory.

/// True for invocations that name a file directly instead of a command.
pub fn is_path_prefixed(token: &str) -> bool {
    token.starts_with('/') || token.starts_with("./") || token.starts_with("../") || token.starts_with('~')
}

/// Normalizes an absolute path: collapses `.`, `..` and repeated separators.
/// `..` above the root stays at the root.
pub fn normalize_abs(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        "/".to_string()
    } else {
        let mut out = String::with_capacity(path.len());
        for p in parts {
            out.push('/');
            out.push_str(p);
        }
        out
    }
}

/// Resolves `target` against `cwd` (absolute) and `home`.
pub fn resolve(target: &str, cwd: &str, home: &str) -> String {
    if target == "~" {
        normalize_abs(home)
    } else if let Some(rest) = target.strip_prefix("~/") {
        normalize_abs(&format!("{home}/{rest}"))
    } else if target.starts_with('/') {
        normalize_abs(target)
    } else {
        normalize_abs(&format!("{cwd}/{target}"))
    }
}

/// Splits a normalized absolute path into (directory, file name).
pub fn split_file(abs: &str) -> (String, Option<String>) {
    if abs == "/" {
        return ("/".to_string(), None);
    }
    match abs.rfind('/') {
        Some(0) => ("/".to_string(), Some(abs[1..].to_string())),
        Some(i) => (abs[..i].to_string(), Some(abs[i + 1..].to_string())),
        None => ("/".to_string(), Some(abs.to_string())),
    }
}
