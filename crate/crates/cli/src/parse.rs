//! Parsers for calibration files and the compact flag syntaxes.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gwcp_core::conformal::{GroupSimplex, GroupedScores};

/// Reads a `group,score` file with 1-based group labels. `groups` overrides
/// the inferred number of groups (the largest label).
pub fn read_calibration(path: &Path, groups: Option<usize>) -> Result<GroupedScores> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_calibration(file, groups).with_context(|| format!("in {}", path.display()))
}

pub fn parse_calibration<R: std::io::Read>(input: R, groups: Option<usize>) -> Result<GroupedScores> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().context("line 1: cannot read header")?.clone();
    if header.len() == 0 {
        bail!("empty input: expected header `group,score`");
    }
    if header.iter().collect::<Vec<_>>() != ["group", "score"] {
        bail!("line 1: expected header `group,score`, found `{}`", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("line {line}: {e}")
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            bail!("line {line}: expected 2 fields, found {}", record.len());
        }
        let group: usize = record[0]
            .parse()
            .map_err(|_| anyhow!("line {line}: invalid group label `{}`", &record[0]))?;
        if group == 0 {
            bail!("line {line}: group labels start at 1");
        }
        let score: f64 = record[1]
            .parse()
            .map_err(|_| anyhow!("line {line}: invalid score `{}`", &record[1]))?;
        if !score.is_finite() {
            bail!("line {line}: score must be finite, found `{}`", &record[1]);
        }
        points.push((group - 1, score));
    }
    if points.is_empty() {
        bail!("no calibration rows");
    }
    let max_label = points.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let k = match groups {
        Some(k) if k < max_label => bail!("--groups {k} is smaller than the largest group label {max_label}"),
        Some(k) => k,
        None => max_label,
    };
    Ok(GroupedScores::from_labeled(k, points)?)
}

/// `uniform`, an inline comma-separated list, or `@path` to a file holding
/// the list (commas or whitespace).
pub fn parse_simplex(spec: &str, groups: Option<usize>) -> Result<GroupSimplex> {
    let simplex = if spec == "uniform" {
        let k = groups.ok_or_else(|| anyhow!("`uniform` needs the number of groups"))?;
        GroupSimplex::uniform(k)?
    } else {
        let text = match spec.strip_prefix('@') {
            Some(path) => std::fs::read_to_string(path).with_context(|| format!("cannot read {path}"))?,
            None => spec.to_string(),
        };
        let probs = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| anyhow!("invalid probability `{s}`")))
            .collect::<Result<Vec<_>>>()?;
        GroupSimplex::new(probs)?
    };
    if let Some(k) = groups {
        if simplex.len() != k {
            bail!("probability vector has {} entries but there are {k} groups", simplex.len());
        }
    }
    Ok(simplex)
}

/// Comma-separated counts where `vxr` repeats `v` `r` times, e.g. `1x10`
/// or `100x4,1`.
pub fn parse_counts(spec: &str) -> Result<Vec<usize>> {
    let mut counts = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (value, repeat) = match item.split_once('x') {
            Some((v, r)) => (v, r.parse::<usize>().map_err(|_| anyhow!("invalid repeat in `{item}`"))?),
            None => (item, 1),
        };
        let value: usize = value.parse().map_err(|_| anyhow!("invalid count in `{item}`"))?;
        counts.extend(std::iter::repeat_n(value, repeat));
    }
    if counts.is_empty() {
        bail!("empty counts");
    }
    Ok(counts)
}
