use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Reads a config file, unwrapping the `params` object of a run manifest.
pub fn load(path: &str) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let Value::Object(mut map) = value else {
        bail!("config {path} must be a JSON object");
    };
    if map.contains_key("command") {
        if let Some(Value::Object(params)) = map.remove("params") {
            return Ok(params);
        }
    }
    Ok(map)
}

/// Overlays the flags that were given on top of the config values.
pub fn merge<T>(flags: &T, config: Option<&Map<String, Value>>) -> anyhow::Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(config) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let Value::Object(known) = serde_json::to_value(T::default())? else {
        unreachable!("argument structs serialize to objects");
    };
    if let Some(key) = config.keys().find(|k| !known.contains_key(*k)) {
        bail!("unknown config key `{key}`");
    }
    let mut merged = config.clone();
    if let Value::Object(given) = serde_json::to_value(flags)? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).context("invalid config value")
}

/// Parses `a..b` (inclusive), `a..=b`, or a comma-separated list.
pub fn parse_list(spec: &str) -> anyhow::Result<Vec<usize>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().with_context(|| format!("bad range `{spec}`"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad range `{spec}`"))?;
        if lo > hi {
            bail!("empty range `{spec}`");
        }
        return Ok((lo..=hi).collect());
    }
    parse_csv(spec)
}

pub fn parse_csv<T: std::str::FromStr>(spec: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let values = spec
        .split(',')
        .map(|s| s.trim().parse::<T>().with_context(|| format!("bad list element `{}`", s.trim())))
        .collect::<anyhow::Result<Vec<T>>>()?;
    if values.is_empty() {
        bail!("empty list");
    }
    Ok(values)
}
