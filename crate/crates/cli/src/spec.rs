//! Command-line grammars for policies and dissimilarity profiles.

use std::fs;
use std::path::Path;

use nvregret::tuning::exponential_spec;
use nvregret::{DissimilarityProfile, MixtureEntry, PolicySpec};

use crate::CliError;

/// A policy family, instantiated for a sample size with [`PolicyTemplate::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyTemplate {
    Erm,
    Werm(Vec<f64>),
    Ewerm(f64),
    Knn(usize),
    /// 1-based inclusive range of samples and a rank.
    Os {
        first: usize,
        last: usize,
        rank: usize,
    },
    /// Rank weights over a 1-based range (`None`: all samples).
    Mix {
        lambdas: Vec<(usize, f64)>,
        range: Option<(usize, usize)>,
    },
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{field}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(field: &str, s: &str) -> Result<T, CliError> {
    s.trim().parse().map_err(|_| bad(field, format!("cannot parse `{s}`")))
}

/// Parses `a..b` (1-based, inclusive).
fn parse_range(s: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| bad("S", format!("expected `first..last`, got `{s}`")))?;
    let (a, b): (usize, usize) = (parse_num("S", a)?, parse_num("S", b)?);
    if a == 0 || b < a {
        return Err(bad("S", format!("range `{s}` must satisfy 1 <= first <= last")));
    }
    Ok((a, b))
}

fn key_values<'a>(body: &'a str, kind: &str) -> Result<Vec<(&'a str, &'a str)>, CliError> {
    body.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad("policy", format!("`{kind}` expects key=value pairs, got `{kv}`")))
        })
        .collect()
}

impl PolicyTemplate {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "erm" if body.is_empty() => Ok(Self::Erm),
            "werm" => {
                let list = body
                    .strip_prefix("w=")
                    .ok_or_else(|| bad("policy", "werm expects `werm:w=w1,w2,...`"))?;
                let w = list.split(',').map(|v| parse_num("w", v)).collect::<Result<Vec<f64>, _>>()?;
                Ok(Self::Werm(w))
            }
            "ewerm" => {
                let g = body
                    .strip_prefix("gamma=")
                    .ok_or_else(|| bad("policy", "ewerm expects `ewerm:gamma=<value>`"))?;
                let g: f64 = parse_num("gamma", g)?;
                if !(0.0..=1.0).contains(&g) {
                    return Err(bad("gamma", format!("must lie in [0, 1], got {g}")));
                }
                Ok(Self::Ewerm(g))
            }
            "knn" => {
                let k = body.strip_prefix("k=").ok_or_else(|| bad("policy", "knn expects `knn:k=<count>`"))?;
                Ok(Self::Knn(parse_num("k", k)?))
            }
            "os" => {
                let (mut range, mut rank) = (None, None);
                for (k, v) in key_values(body, "os")? {
                    match k {
                        "S" => range = Some(parse_range(v)?),
                        "r" => rank = Some(parse_num("r", v)?),
                        _ => return Err(bad("policy", format!("unknown os key `{k}`"))),
                    }
                }
                let (first, last) = range.ok_or_else(|| bad("S", "os requires `S=first..last`"))?;
                let rank = rank.ok_or_else(|| bad("r", "os requires `r=<rank>`"))?;
                Ok(Self::Os { first, last, rank })
            }
            "mix" => {
                let (mut file, mut range) = (None, None);
                for (k, v) in key_values(body, "mix")? {
                    match k {
                        "file" => file = Some(v),
                        "S" => range = Some(parse_range(v)?),
                        _ => return Err(bad("policy", format!("unknown mix key `{k}`"))),
                    }
                }
                let file = file.ok_or_else(|| bad("file", "mix requires `file=<path>`"))?;
                Ok(Self::Mix {
                    lambdas: read_mixture(Path::new(file))?,
                    range,
                })
            }
            _ => Err(bad(
                "policy",
                format!("unknown policy `{s}`; expected erm | werm:w=.. | ewerm:gamma=.. | knn:k=.. | os:S=a..b,r=.. | mix:file=.."),
            )),
        }
    }

    pub fn build(&self, n: usize) -> Result<PolicySpec, CliError> {
        let check_range = |last: usize| {
            if last > n {
                Err(bad(
                    "S",
                    format!("range ends at {last} but only {n} samples are available"),
                ))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            Self::Erm => PolicySpec::erm(n),
            Self::Werm(w) => {
                if w.len() != n {
                    return Err(bad("w", format!("{} weights given for {n} samples", w.len())));
                }
                PolicySpec::WeightedErm { weights: w.clone() }
            }
            Self::Ewerm(g) => exponential_spec(*g, n),
            Self::Knn(k) => {
                if *k == 0 || *k > n {
                    return Err(bad("k", format!("must lie in 1..={n}, got {k}")));
                }
                PolicySpec::nearest_neighbors(*k, n)
            }
            Self::Os { first, last, rank } => {
                check_range(*last)?;
                PolicySpec::OrderStatistic {
                    subset: (first - 1..*last).collect(),
                    rank: *rank,
                }
            }
            Self::Mix { lambdas, range } => {
                let (first, last) = range.unwrap_or((1, n));
                check_range(last)?;
                let subset: Vec<usize> = (first - 1..last).collect();
                PolicySpec::MixtureOs {
                    entries: lambdas
                        .iter()
                        .filter(|(_, l)| *l > 0.0)
                        .map(|&(rank, weight)| MixtureEntry {
                            subset: subset.clone(),
                            rank,
                            weight,
                        })
                        .collect(),
                }
            }
        })
    }
}

/// Reads `rank,lambda` rows; a header row is optional.
fn read_mixture(path: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad("file", format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad("file", e))?;
        if rec.len() != 2 {
            return Err(bad(
                "file",
                format!("line {} must have two fields `rank,lambda`", i + 1),
            ));
        }
        if i == 0 && rec[0].parse::<usize>().is_err() {
            continue;
        }
        out.push((parse_num("rank", &rec[0])?, parse_num("lambda", &rec[1])?));
    }
    if out.is_empty() {
        return Err(bad("file", "mixture file has no rows"));
    }
    Ok(out)
}

/// Parses `const:zeta:n`, `drift:delta:n`, a comma-separated list, or a file of values.
pub fn parse_dissim(s: &str) -> Result<DissimilarityProfile, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["const", z, n] => Ok(DissimilarityProfile::constant(
            parse_num("dissim", z)?,
            parse_num("dissim", n)?,
        )?),
        ["drift", d, n] => Ok(DissimilarityProfile::drift(
            parse_num("dissim", d)?,
            parse_num("dissim", n)?,
        )?),
        ["const" | "drift", ..] => Err(bad("dissim", format!("expected `{}:<value>:<n>`, got `{s}`", parts[0]))),
        _ => {
            if let Ok(values) = parse_list(s) {
                return Ok(DissimilarityProfile::new(values)?);
            }
            let text = fs::read_to_string(s)
                .map_err(|e| bad("dissim", format!("`{s}` is neither a list nor a readable file: {e}")))?;
            Ok(DissimilarityProfile::new(parse_list(&text)?)?)
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    let values = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num("dissim", t))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(bad("dissim", "no values"));
    }
    Ok(values)
}
