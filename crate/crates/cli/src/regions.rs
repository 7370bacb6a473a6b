//! Line protocol for region queries and random query sets for the oracle
//! comparison.
//!
//! Input: `p ell p0 ell0 [p1 ell1]` per line (`#` comments and blank lines
//! skipped; `p` may be `inf`). Output: `IN reason` or `OUT reason`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morrey_lab::scale_index::{region_report, to_index};
use morrey_lab::verify::RegionQuery;
use morrey_lab::{Exponent, MorreyParams, PotentialClass, ProblemDims, ScaleIndex};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub space: MorreyParams,
    pub classes: Vec<PotentialClass>,
}

fn pair(p: &str, ell: &str, dims: &ProblemDims) -> Result<MorreyParams, String> {
    let p: Exponent = p.parse().map_err(|e| format!("{e:?}"))?;
    let ell: f64 = ell.parse().map_err(|_| format!("bad ell {ell:?}"))?;
    MorreyParams::new(p, ell, dims).map_err(|e| e.to_string())
}

pub fn parse_query(line: &str, dims: &ProblemDims) -> Result<Query, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 4 && f.len() != 6 {
        return Err(format!("expected 4 or 6 fields, got {}", f.len()));
    }
    let space = pair(f[0], f[1], dims)?;
    let classes = f[2..]
        .chunks(2)
        .map(|c| pair(c[0], c[1], dims).map(|mp| PotentialClass::new(mp, dims)))
        .collect::<Result<_, _>>()?;
    Ok(Query { space, classes })
}

/// `IN` when an `alpha` puts the space in every `Sigma` (and in `J*` for two
/// classes) with all classes admissible.
pub fn answer(q: &Query, dims: &ProblemDims) -> String {
    let gamma = to_index(&q.space, dims);
    let r = region_report(&gamma, &q.classes, dims, None);
    let admissible = q.classes.iter().all(|c| c.admissible);
    let inside = admissible && r.in_sub_triangle && r.in_sigma && r.in_star.unwrap_or(true);
    let mut reasons = r.reasons.clone();
    if r.alpha.is_some() && !r.in_sigma {
        if !r.in_existence {
            reasons.push("outside E_alpha".into());
        }
        if !r.in_regularity {
            reasons.push("outside R_beta".into());
        }
    }
    format!("{} gamma={} {}", if inside { "IN" } else { "OUT" }, gamma, reasons.join("; "))
}

/// Answers every query line of `input`; errors name the line.
pub fn answer_all(input: &str, dims: &ProblemDims) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let q = parse_query(t, dims).map_err(|e| CliError::Config(format!("query line {}: {e}", i + 1)))?;
        out.push(answer(&q, dims));
    }
    Ok(out)
}

/// `per_kind` queries of each of the seven kinds: classes cycle through
/// `classes`, pairs through `pairs`, points uniform in the triangle.
pub fn random_queries(
    dims: &ProblemDims,
    classes: &[PotentialClass],
    pairs: &[[PotentialClass; 2]],
    per_kind: usize,
    seed: u64,
) -> Vec<RegionQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gm = dims.gamma2_max();
    let mut pt = |g1_max: f64| {
        let g1: f64 = rng.gen_range(0.0..g1_max);
        let s: f64 = rng.gen_range(0.0..1.0);
        ScaleIndex::raw(g1, (g1 * gm * s).max(1e-9))
    };
    let mut qs = Vec::with_capacity(7 * per_kind);
    for i in 0..per_kind {
        let c = classes[i % classes.len()];
        let amax = (1.0 - c.gamma0.g1).max(1e-6);
        qs.push(RegionQuery::SubTriangle { gamma: pt(1.0), class: c });
        qs.push(RegionQuery::Existence { gamma: pt(1.0), alpha: pt(1.0) });
        qs.push(RegionQuery::Regularity { gamma: pt(1.0), alpha: pt(amax), class: c });
        qs.push(RegionQuery::Sigma { gamma: pt(1.0), alpha: pt(amax), class: c });
        if pairs.is_empty() {
            continue;
        }
        let p = pairs[i % pairs.len()];
        qs.push(RegionQuery::Admissible { gamma: pt(1.0), classes: p.to_vec() });
        qs.push(RegionQuery::Star { gamma: pt(1.0), classes: p });
        qs.push(RegionQuery::Cd2 { gamma: pt(1.0), classes: p });
    }
    qs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d() -> ProblemDims {
        ProblemDims::new(1, 1, 1.0).unwrap()
    }

    #[test]
    fn protocol_examples() {
        let out = answer_all("# comment\n\n2 0.5 2 0.5\n1 1 2 0.5\ninf 1 4 1 2 0.5\n", &d()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[0].starts_with("IN "), "{}", out[0]);
        // slope of M^{1,1} exceeds that of M^{2,1/2}
        assert!(out[1].starts_with("OUT ") && out[1].contains("slope"), "{}", out[1]);
        assert!(out[2].starts_with("IN "), "{}", out[2]);
    }

    #[test]
    fn inadmissible_class_is_out() {
        // mu = 1/2: kappa0 = l0 / p0 = 1
        let half = ProblemDims::new(1, 1, 0.5).unwrap();
        let out = answer_all("2 0.5 1 1\n", &half).unwrap();
        assert!(out[0].starts_with("OUT") && out[0].contains("kappa0"), "{}", out[0]);
    }

    #[test]
    fn malformed_line_is_named() {
        match answer_all("2 0.5\n", &d()) {
            Err(CliError::Config(m)) => assert!(m.contains("line 1"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_queries_are_seeded() {
        let c = PotentialClass::bounded(&d());
        let a = random_queries(&d(), &[c], &[[c, c]], 5, 9);
        let b = random_queries(&d(), &[c], &[[c, c]], 5, 9);
        assert_eq!(a.len(), 35);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
