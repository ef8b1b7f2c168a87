//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Gauss-Kronrod 7/15 on one panel: (Kronrod estimate, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    for _ in 0..500 {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= eps {
            break;
        }
        let worst = (0..panels.len()).max_by(|&i, &j| panels[i].3.total_cmp(&panels[j].3)).unwrap();
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// `P(lower ≤ X ≤ upper)` for a standard multivariate normal with
/// correlation `corr` (dimension 1 to 3), by conditioning on the first
/// coordinate and integrating.
pub fn normal_box(lower: &[f64], upper: &[f64], corr: &[Vec<f64>], eps: f64) -> f64 {
    let q = lower.len();
    if q == 1 {
        return (phi_cdf(upper[0]) - phi_cdf(lower[0])).max(0.0);
    }
    let rho: Vec<f64> = (1..q).map(|j| corr[j][0]).collect();
    let s: Vec<f64> = rho.iter().map(|r| (1.0 - r * r).sqrt()).collect();
    let cond: Vec<Vec<f64>> = (1..q)
        .map(|j| (1..q).map(|k| if j == k { 1.0 } else { (corr[j][k] - rho[j - 1] * rho[k - 1]) / (s[j - 1] * s[k - 1]) }).collect())
        .collect();
    let a = lower[0].max(-9.0);
    let b = upper[0].min(9.0);
    integrate(
        |x| {
            let lo: Vec<f64> = (1..q).map(|j| (lower[j] - rho[j - 1] * x) / s[j - 1]).collect();
            let hi: Vec<f64> = (1..q).map(|j| (upper[j] - rho[j - 1] * x) / s[j - 1]).collect();
            phi_pdf(x) * normal_box(&lo, &hi, &cond, eps)
        },
        a,
        b,
        eps,
    )
}

/// Multivariate t box probability as a scale mixture of normals over the
/// chi-square variable; `df = 0` means normal.
pub fn t_box(lower: &[f64], upper: &[f64], corr: &[Vec<f64>], df: f64, eps: f64) -> f64 {
    if df == 0.0 {
        return normal_box(lower, upper, corr, eps);
    }
    let ln_norm = 0.5 * df * 2f64.ln() + libm::lgamma(0.5 * df);
    let density = |w: f64| if w <= 0.0 { 0.0 } else { ((0.5 * df - 1.0) * w.ln() - 0.5 * w - ln_norm).exp() };
    let sd = (2.0 * df).sqrt();
    let lo = (df - 12.0 * sd).max(0.0);
    let hi = df + 20.0 * sd + 40.0;
    integrate(
        |w| {
            let d = density(w);
            if d < 1e-300 {
                return 0.0;
            }
            let sc = (w / df).sqrt();
            let l: Vec<f64> = lower.iter().map(|x| x * sc).collect();
            let u: Vec<f64> = upper.iter().map(|x| x * sc).collect();
            d * normal_box(&l, &u, corr, eps)
        },
        lo,
        hi,
        eps,
    )
}

/// A random correlation matrix from normalized Gaussian vectors.
pub fn random_corr(rng: &mut ChaCha8Rng, q: usize) -> Vec<Vec<f64>> {
    let vs: Vec<Vec<f64>> = (0..q)
        .map(|_| {
            let v: Vec<f64> = (0..q + 1).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    (0..q)
        .map(|i| (0..q).map(|j| if i == j { 1.0 } else { vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum() }).collect())
        .collect()
}

/// Random box with some unbounded sides.
pub fn random_bounds(rng: &mut ChaCha8Rng, q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(q);
    let mut upper = Vec::with_capacity(q);
    for _ in 0..q {
        let l = if rng.random::<f64>() < 0.3 { f64::NEG_INFINITY } else { -2.5 + 4.0 * rng.random::<f64>() };
        let u = if rng.random::<f64>() < 0.3 {
            f64::INFINITY
        } else if l.is_finite() {
            l + 0.2 + 2.8 * rng.random::<f64>()
        } else {
            -1.5 + 4.0 * rng.random::<f64>()
        };
        lower.push(l);
        upper.push(u);
    }
    (lower, upper)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One random problem for the oracle comparison: (lower, upper, corr, df).
pub fn random_problem(rng: &mut ChaCha8Rng, idx: usize) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, f64) {
    let q = 2 + idx % 2;
    let df = [0.0, 5.0, 16.0, 100.0][(idx / 2) % 4];
    let corr = random_corr(rng, q);
    let (lower, upper) = random_bounds(rng, q);
    (lower, upper, corr, df)
}

/// Outcome of comparing the engine with the quadrature oracle.
pub struct OracleCheck {
    pub worst_excess: f64,
    pub failures: Vec<String>,
}

/// Runs `count` random 2-D/3-D problems against the oracle, requiring
/// `|engine − oracle| ≤ 1e-4 + abs_error` (the engine's error is already
/// three standard errors).
pub fn mvt_oracle_check(count: usize, seed: u64) -> OracleCheck {
    use dunnett_ctp::contrasts::CorrelationMatrix;
    use dunnett_ctp::mvt::{mvt_cdf_box, MvtOptions, MvtProblem};
    let mut r = rng(seed);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for idx in 0..count {
        let (lower, upper, corr, df) = random_problem(&mut r, idx);
        let q = lower.len();
        let m = nalgebra::DMatrix::from_fn(q, q, |i, j| corr[i][j]);
        let problem = MvtProblem::new(lower.clone(), upper.clone(), CorrelationMatrix::new(m).unwrap(), df).unwrap();
        let est = mvt_cdf_box(&problem, &MvtOptions::default(), 1000 + idx as u64).unwrap();
        let exact = t_box(&lower, &upper, &corr, df, 1e-9);
        let excess = (est.value - exact).abs() - (1e-4 + est.abs_error);
        worst = worst.max(excess);
        if excess > 0.0 {
            failures.push(format!(
                "problem {idx} (q={q}, df={df}): engine {:.6} ± {:.1e}, oracle {exact:.6}",
                est.value, est.abs_error
            ));
        }
    }
    OracleCheck { worst_excess: worst, failures }
}

/// Product rule for the normal case with identity correlation.
pub fn product_rule_check(count: usize, seed: u64) -> Vec<String> {
    use dunnett_ctp::contrasts::CorrelationMatrix;
    use dunnett_ctp::mvt::{mvt_cdf_box, MvtOptions, MvtProblem};
    let mut r = rng(seed);
    let mut failures = Vec::new();
    for idx in 0..count {
        let q = 2 + idx % 5;
        let (lower, upper) = random_bounds(&mut r, q);
        let expected: f64 = lower.iter().zip(&upper).map(|(&l, &u)| phi_cdf(u) - phi_cdf(l)).product();
        let problem = MvtProblem::new(lower, upper, CorrelationMatrix::identity(q), 0.0).unwrap();
        let est = mvt_cdf_box(&problem, &MvtOptions::default(), idx as u64).unwrap();
        if (est.value - expected).abs() > 1e-4 + est.abs_error {
            failures.push(format!("case {idx} (q={q}): engine {:.6}, product {expected:.6}", est.value));
        }
    }
    failures
}

/// Minimal DOT checker for the trees we emit: a `digraph` with attribute,
/// node and edge statements, balanced quotes and brackets, and edges only
/// between declared nodes. Returns (node ids, edges).
pub fn check_dot(src: &str) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let body = src.trim();
    let open = body.find('{').ok_or("no opening brace")?;
    let header: Vec<&str> = body[..open].split_whitespace().collect();
    if header.len() != 2 || header[0] != "digraph" || !is_id(header[1]) {
        return Err(format!("bad header {header:?}"));
    }
    if !body.ends_with('}') {
        return Err("no closing brace".into());
    }
    let inner = &body[open + 1..body.len() - 1];
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for stmt in split_statements(inner)? {
        let stmt = stmt.trim();
        if stmt.is_empty() {
            continue;
        }
        if let Some((a, b)) = stmt.split_once("->") {
            let (a, b) = (a.trim(), b.trim());
            if !is_id(a) || !is_id(b) {
                return Err(format!("bad edge `{stmt}`"));
            }
            edges.push((a.to_string(), b.to_string()));
        } else if let Some(open) = stmt.find('[') {
            if !stmt.ends_with(']') {
                return Err(format!("unterminated attribute list `{stmt}`"));
            }
            let id = stmt[..open].trim();
            if !is_id(id) {
                return Err(format!("bad node id `{id}`"));
            }
            check_attrs(&stmt[open + 1..stmt.len() - 1])?;
            if id != "node" && id != "edge" && id != "graph" {
                nodes.push(id.to_string());
            }
        } else if let Some((k, v)) = stmt.split_once('=') {
            if !is_id(k.trim()) || v.trim().is_empty() {
                return Err(format!("bad attribute `{stmt}`"));
            }
        } else {
            return Err(format!("unrecognized statement `{stmt}`"));
        }
    }
    for (a, b) in &edges {
        if !nodes.contains(a) || !nodes.contains(b) {
            return Err(format!("edge {a} -> {b} uses an undeclared node"));
        }
    }
    Ok((nodes, edges))
}

fn is_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn split_statements(s: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let (mut in_quote, mut escaped, mut depth) = (false, false, 0i32);
    for c in s.chars() {
        if in_quote {
            cur.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_quote = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_quote = true,
            '[' => depth += 1,
            ']' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err("unbalanced brackets".into());
        }
        if (c == ';' || c == '\n') && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    if in_quote || depth != 0 {
        return Err("unbalanced quotes or brackets".into());
    }
    out.push(cur);
    Ok(out)
}

fn check_attrs(s: &str) -> Result<(), String> {
    let mut rest = s.trim();
    while !rest.is_empty() {
        let (key, after) = rest.split_once('=').ok_or(format!("attribute without value in `{s}`"))?;
        if !is_id(key.trim()) {
            return Err(format!("bad attribute name `{key}`"));
        }
        let after = after.trim_start();
        let tail = if let Some(q) = after.strip_prefix('"') {
            let mut end = None;
            let mut escaped = false;
            for (i, c) in q.char_indices() {
                match (escaped, c) {
                    (true, _) => escaped = false,
                    (false, '\\') => escaped = true,
                    (false, '"') => {
                        end = Some(i);
                        break;
                    }
                    _ => {}
                }
            }
            &q[end.ok_or("unterminated string")? + 1..]
        } else {
            let end = after.find(',').unwrap_or(after.len());
            if !is_id(after[..end].trim()) {
                return Err(format!("bad attribute value `{}`", &after[..end]));
            }
            &after[end..]
        };
        rest = tail.trim_start().trim_start_matches(',').trim_start();
    }
    Ok(())
}

/// The compiled command-line binary.
pub fn binary() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_dunnett-ctp"))
}

pub fn demo_data() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/dose_gender.csv")
}

pub const DEMO_COLUMNS: [&str; 6] = ["--group-column", "dose", "--response-column", "pain", "--block-column", "gender"];
