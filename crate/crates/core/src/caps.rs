//! Enumeration limits shared by every brute-force sweep in the crate.

use std::env;

/// Environment variable that overrides [`Caps::max_enumeration`].
pub const CAPS_ENV: &str = "GS_CAPS";

/// Default bound on the number of objects a single sweep may enumerate.
pub const DEFAULT_MAX_ENUMERATION: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Upper bound on enumerated trees, strategies or search nodes per sweep.
    pub max_enumeration: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_enumeration: DEFAULT_MAX_ENUMERATION,
        }
    }
}

impl Caps {
    pub fn new(max_enumeration: u64) -> Self {
        Caps { max_enumeration }
    }

    /// Reads `GS_CAPS`, falling back to the default when unset or unparsable.
    pub fn from_env() -> Self {
        env::var(CAPS_ENV)
            .ok()
            .and_then(|v| parse_count(&v))
            .map(Caps::new)
            .unwrap_or_default()
    }
}

/// Accepts plain integers as well as `1e6` / `10^6` shorthands.
fn parse_count(s: &str) -> Option<u64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let (base, exp) = if let Some((b, e)) = s.split_once("e") {
        (b.parse::<u64>().ok()?, e.parse::<u32>().ok()?)
    } else if let Some((b, e)) = s.split_once('^') {
        let b = b.parse::<u64>().ok()?;
        if b != 10 {
            return b.checked_pow(e.parse().ok()?);
        }
        (1, e.parse::<u32>().ok()?)
    } else {
        return None;
    };
    10u64.checked_pow(exp)?.checked_mul(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_shorthands() {
        assert_eq!(parse_count("1000"), Some(1000));
        assert_eq!(parse_count("1e6"), Some(1_000_000));
        assert_eq!(parse_count("10^4"), Some(10_000));
        assert_eq!(parse_count("2^10"), Some(1024));
        assert_eq!(parse_count("lots"), None);
    }
}
