//! Parsers for the compact policy and grid flags.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use corridor_core::PolicyParams;

fn pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .with_context(|| format!("expected key=value, got `{part}`"))?;
        let key = match key.trim() {
            "fleet" => "xi".to_string(),
            k => k.to_string(),
        };
        if !matches!(key.as_str(), "k" | "tau" | "xi") {
            bail!("unknown key `{key}` (expected k, tau or xi)");
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("`{key}` given twice");
        }
    }
    Ok(out)
}

/// `k=50,tau=63,xi=6`; missing keys keep the values of `base`.
pub fn parse_policy(text: &str, base: PolicyParams) -> Result<PolicyParams> {
    let mut p = base;
    for (key, value) in pairs(text)? {
        let v: u32 = value.parse().with_context(|| format!("`{key}` must be a non-negative integer"))?;
        match key.as_str() {
            "k" => p.k = v,
            "tau" => p.tau = v,
            _ => p.fleet = v,
        }
    }
    Ok(p)
}

/// `start:end:step`, `start:end` (step 1) or a single value.
pub fn parse_range(text: &str) -> Result<Vec<u32>> {
    let nums: Vec<u32> = text
        .split(':')
        .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad number in range `{text}`")))
        .collect::<Result<_>>()?;
    let (start, end, step) = match nums[..] {
        [v] => (v, v, 1),
        [a, b] => (a, b, 1),
        [a, b, c] => (a, b, c),
        _ => bail!("range `{text}` must look like start:end:step"),
    };
    if step == 0 {
        bail!("range `{text}` has a zero step");
    }
    if start > end {
        bail!("range `{text}` is empty");
    }
    Ok((start..=end).step_by(step as usize).collect())
}

/// Grid ranges per key; keys left out are absent from the map.
pub fn parse_grid(text: &str) -> Result<BTreeMap<String, Vec<u32>>> {
    pairs(text)?
        .into_iter()
        .map(|(k, v)| Ok((k, parse_range(&v)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_overrides_keep_missing_keys() {
        let p = parse_policy("tau=63, xi=6", PolicyParams::new(50, 0, 2)).unwrap();
        assert_eq!(p, PolicyParams::new(50, 63, 6));
        assert!(parse_policy("k=-1", PolicyParams::default()).is_err());
        assert!(parse_policy("kappa=1", PolicyParams::default()).is_err());
        assert!(parse_policy("k=1,k=2", PolicyParams::default()).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("50:58:2").unwrap(), vec![50, 52, 54, 56, 58]);
        assert_eq!(parse_range("4:6").unwrap(), vec![4, 5, 6]);
        assert_eq!(parse_range("7").unwrap(), vec![7]);
        assert_eq!(parse_range("50:57:2").unwrap(), vec![50, 52, 54, 56]);
        assert!(parse_range("58:50:2").is_err());
        assert!(parse_range("50:58:0").is_err());
        assert!(parse_range("").is_err());
        assert!(parse_range("1:2:3:4").is_err());
    }

    #[test]
    fn grid() {
        let g = parse_grid("k=50:54:2,xi=4").unwrap();
        assert_eq!(g["k"], vec![50, 52, 54]);
        assert_eq!(g["xi"], vec![4]);
        assert!(!g.contains_key("tau"));
    }
}
