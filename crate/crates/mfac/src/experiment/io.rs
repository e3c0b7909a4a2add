//! File plumbing: atomic writes and the parameter checkpoint format.
//!
//! Checkpoints are plain text: one architecture descriptor line followed by
//! one parameter per line in canonical flattening order. Floats print with
//! Rust's shortest-roundtrip formatting, so a save/load cycle is bit-exact.
//!
//! Descriptor lines:
//! - `mlp <in> <hidden...> <out> <hidden-act> <output-act>`
//! - `gaussian-policy <state-dim> <action-dim> <trunk> <head> <std-floor>`

use crate::approximators::{Activation, GaussianPolicy, Mlp, Parametric, PolicyArch};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};

/// Write a file atomically (write to a sibling temp path, then rename), so
/// interrupted runs never leave truncated artifacts.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp: PathBuf = path.with_extension("tmp-write");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn act_tag(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn parse_act(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::Config(format!("unknown activation tag '{other}'"))),
    }
}

/// Serialize an MLP checkpoint.
pub fn mlp_to_text<T: Scalar>(mlp: &Mlp<T>) -> String {
    let mut out = String::from("mlp");
    for d in mlp.dims() {
        out.push_str(&format!(" {d}"));
    }
    out.push_str(&format!(
        " {} {}\n",
        act_tag(mlp.hidden_activation()),
        act_tag(mlp.output_activation())
    ));
    for v in mlp.flatten() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Parse an MLP checkpoint.
pub fn mlp_from_text<T: Scalar>(text: &str) -> Result<Mlp<T>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty checkpoint".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("mlp") {
        return Err(Error::Config("not an mlp checkpoint".into()));
    }
    let tokens: Vec<&str> = parts.collect();
    if tokens.len() < 4 {
        return Err(Error::Config("malformed mlp descriptor".into()));
    }
    let dims: Vec<usize> = tokens[..tokens.len() - 2]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let hidden = parse_act(tokens[tokens.len() - 2])?;
    let output = parse_act(tokens[tokens.len() - 1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut mlp = Mlp::new(&dims, hidden, output, &mut rng);
    let params = parse_params::<T>(lines, mlp.param_count())?;
    mlp.unflatten_from(&params)?;
    Ok(mlp)
}

/// Serialize a Gaussian-policy checkpoint.
pub fn policy_to_text<T: Scalar>(policy: &GaussianPolicy<T>, arch: &PolicyArch) -> String {
    let mut out = format!(
        "gaussian-policy {} {} {} {} {}\n",
        policy.state_dim(),
        policy.action_dim(),
        arch.trunk_width,
        arch.head_width,
        arch.std_floor
    );
    for v in policy.flatten() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Parse a Gaussian-policy checkpoint.
pub fn policy_from_text<T: Scalar>(text: &str) -> Result<(GaussianPolicy<T>, PolicyArch)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty checkpoint".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("gaussian-policy") {
        return Err(Error::Config("not a gaussian-policy checkpoint".into()));
    }
    let nums: Vec<&str> = parts.collect();
    if nums.len() != 5 {
        return Err(Error::Config("malformed policy descriptor".into()));
    }
    let state_dim: usize = nums[0].parse().map_err(|e: std::num::ParseIntError| Error::Config(e.to_string()))?;
    let action_dim: usize = nums[1].parse().map_err(|e: std::num::ParseIntError| Error::Config(e.to_string()))?;
    let arch = PolicyArch {
        trunk_width: nums[2].parse().map_err(|e: std::num::ParseIntError| Error::Config(e.to_string()))?,
        head_width: nums[3].parse().map_err(|e: std::num::ParseIntError| Error::Config(e.to_string()))?,
        std_floor: nums[4].parse().map_err(|e: std::num::ParseFloatError| Error::Config(e.to_string()))?,
        init_std: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut policy = GaussianPolicy::new(state_dim, action_dim, &arch, &mut rng);
    let params = parse_params::<T>(lines, policy.param_count())?;
    policy.unflatten_from(&params)?;
    Ok((policy, arch))
}

fn parse_params<'a, T: Scalar>(
    lines: impl Iterator<Item = &'a str>,
    expected: usize,
) -> Result<Vec<T>> {
    let mut params = Vec::with_capacity(expected);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e: std::num::ParseFloatError| Error::Config(e.to_string()))?;
        params.push(crate::scalar::real::<T>(v));
    }
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: params.len(),
            context: "checkpoint parameter count",
        });
    }
    Ok(params)
}
