//! Command-line front end: strict `key=value` configuration, the `kernel`,
//! `verify` and `klembeck` commands, and their CSV/JSON reports.
//!
//! Exit codes: 0 pass, 1 computational or tolerance failure, 2 usage or
//! configuration error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::asympt::{self, PlaneChoice, RaySpec, ScanReport};
use crate::cjet::C64;
use crate::crfoliation::{self, Foliation, LEVI_PAIRING};
use crate::curvcheck::{CheckError, Geometry, IdentityId};
use crate::domains::{self, AffineMap, DomainSpec, KernelModel, ShadowPolynomial, ShadowTerm};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn compute_err(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Verify,
    Klembeck,
}

/// Which defining function the identity suite uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiSource {
    Bergman,
    /// `|z|² − 1`; points are placed on `|z|² = 1 − ε`.
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planes {
    Horizontal,
    Sigma0,
    Both,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub series_tol: f64,
    pub phi: PhiSource,
    pub kernel_points: Vec<Vec<C64>>,
    pub identities: Vec<IdentityId>,
    pub verify_points: Vec<Vec<C64>>,
    pub random_points: usize,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub identity_tol: f64,
    /// Negative-control hook: overrides the `L_θ` factor.
    pub pairing: f64,
    pub anchor: Vec<C64>,
    pub directions: Vec<Vec<C64>>,
    pub epsilons: Vec<f64>,
    pub planes: Planes,
    pub fixed_plane: Option<Vec<C64>>,
    pub fit_rows: usize,
    pub scan_tol: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

const KEYS: &[&str] = &[
    "domain.kind",
    "domain.dim",
    "domain.degree",
    "domain.quadrature",
    "domain.shadow",
    "domain.affine.matrix",
    "domain.affine.translation",
    "domain.series_tol",
    "kernel.points",
    "verify.phi",
    "verify.ids",
    "verify.points",
    "verify.random_points",
    "verify.epsilon_min",
    "verify.epsilon_max",
    "verify.identity_tol",
    "verify.pairing",
    "scan.anchor",
    "scan.directions",
    "scan.epsilons",
    "scan.epsilon_geometric",
    "scan.plane",
    "scan.fit_rows",
    "scan.scan_tol",
    "run.seed",
    "run.jobs",
    "output.dir",
    "cache.dir",
];

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("bad complex number {s:?}");
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(body) = t.strip_suffix('i') {
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
                split = Some(k);
                break;
            }
        }
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            x => x,
        };
        let re: f64 = re.parse().map_err(|_| bad())?;
        let im: f64 = im.parse().map_err(|_| bad())?;
        Ok(C64::new(re, im))
    } else {
        t.parse::<f64>().map(|v| C64::new(v, 0.0)).map_err(|_| bad())
    }
}

fn parse_vector(s: &str) -> Result<Vec<C64>, String> {
    s.split(',').map(parse_complex).collect()
}

fn parse_vectors(s: &str) -> Result<Vec<Vec<C64>>, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_vector).collect()
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| cfg_err(format!("{key}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(cfg_err(format!("{key}: not finite")));
    }
    Ok(v)
}

fn parse_usize(key: &str, s: &str) -> Result<usize, CliError> {
    s.trim().parse().map_err(|_| cfg_err(format!("{key}: bad integer {s:?}")))
}

/// `coeff*e1,e2 + coeff*e1,e2 + …`, or a preset name.
fn parse_shadow(dim: usize, s: &str) -> Result<ShadowPolynomial, CliError> {
    match s.trim() {
        "ball" => return Ok(ShadowPolynomial::ball(dim)),
        "perturbed_ball" => return Ok(ShadowPolynomial::perturbed_ball()),
        _ => {}
    }
    let mut terms = Vec::new();
    for part in s.split('+') {
        let (c, e) = part
            .split_once('*')
            .ok_or_else(|| cfg_err(format!("domain.shadow: term {part:?} is not coeff*exponents")))?;
        let coeff = parse_f64("domain.shadow", c)?;
        let exps = e
            .split(',')
            .map(|x| x.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| cfg_err(format!("domain.shadow: bad exponents {e:?}")))?;
        terms.push(ShadowTerm { exps, coeff });
    }
    ShadowPolynomial::new(dim, terms).map_err(|e| cfg_err(e.to_string()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(cfg_err(format!("unknown key {k:?}")));
            }
            if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(cfg_err(format!("duplicate key {k:?}")));
            }
        }
        let get = |k: &str| kv.get(k).map(String::as_str);
        let vecs = |k: &str| -> Result<Option<Vec<Vec<C64>>>, CliError> {
            get(k).map(|s| parse_vectors(s).map_err(|e| cfg_err(format!("{k}: {e}")))).transpose()
        };

        let dim = get("domain.dim").map(|s| parse_usize("domain.dim", s)).transpose()?.unwrap_or(2);
        if dim == 0 {
            return Err(cfg_err("domain.dim must be positive"));
        }
        let degree = get("domain.degree")
            .map(|s| parse_usize("domain.degree", s))
            .transpose()?
            .unwrap_or(domains::DEFAULT_DEGREE);
        let quadrature = get("domain.quadrature")
            .map(|s| parse_usize("domain.quadrature", s))
            .transpose()?
            .unwrap_or(domains::DEFAULT_QUADRATURE);
        let domain = match get("domain.kind").unwrap_or("unit_ball") {
            "unit_ball" => {
                let mut d = DomainSpec::unit_ball(dim);
                d.truncation_degree = degree;
                d.quadrature_order = quadrature;
                d
            }
            "affine_image" => {
                let m = vecs("domain.affine.matrix")?.ok_or_else(|| cfg_err("affine_image needs domain.affine.matrix"))?;
                let t = match vecs("domain.affine.translation")? {
                    Some(mut v) if v.len() == 1 => v.remove(0),
                    Some(_) => return Err(cfg_err("domain.affine.translation must be one vector")),
                    None => vec![C64::new(0.0, 0.0); dim],
                };
                if m.len() != dim || t.len() != dim {
                    return Err(cfg_err("affine map size does not match domain.dim"));
                }
                let map = AffineMap::new(m, t).map_err(|e| cfg_err(e.to_string()))?;
                DomainSpec::affine_image(map)
            }
            "reinhardt_series" => {
                let shadow = parse_shadow(dim, get("domain.shadow").unwrap_or("ball"))?;
                DomainSpec::reinhardt_series(shadow, degree, quadrature)
            }
            other => return Err(cfg_err(format!("domain.kind: unknown kind {other:?}"))),
        };
        domain.validate().map_err(|e| cfg_err(e.to_string()))?;
        let series_tol = get("domain.series_tol")
            .map(|s| parse_f64("domain.series_tol", s))
            .transpose()?
            .unwrap_or(domains::DEFAULT_SERIES_TOL);
        let phi = match get("verify.phi").unwrap_or("bergman") {
            "bergman" => PhiSource::Bergman,
            "sphere" => PhiSource::Sphere,
            other => return Err(cfg_err(format!("verify.phi: unknown value {other:?}"))),
        };
        let identities = match get("verify.ids") {
            None | Some("all") => IdentityId::ALL.to_vec(),
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<IdentityId>().map_err(cfg_err))
                .collect::<Result<_, _>>()?,
        };
        let positive = |k: &str, default: f64| -> Result<f64, CliError> {
            let v = get(k).map(|s| parse_f64(k, s)).transpose()?.unwrap_or(default);
            if v > 0.0 {
                Ok(v)
            } else {
                Err(cfg_err(format!("{k} must be positive")))
            }
        };
        let epsilon_min = get("verify.epsilon_min")
            .map(|s| parse_f64("verify.epsilon_min", s))
            .transpose()?
            .unwrap_or(0.05);
        let epsilon_max = get("verify.epsilon_max")
            .map(|s| parse_f64("verify.epsilon_max", s))
            .transpose()?
            .unwrap_or(0.4);
        if !(epsilon_min >= 0.0 && epsilon_max >= epsilon_min) {
            return Err(cfg_err("need 0 ≤ verify.epsilon_min ≤ verify.epsilon_max"));
        }
        let epsilons = match (get("scan.epsilons"), get("scan.epsilon_geometric")) {
            (Some(_), Some(_)) => return Err(cfg_err("give scan.epsilons or scan.epsilon_geometric, not both")),
            (Some(s), None) => {
                let v: Vec<f64> = s
                    .split(',')
                    .filter(|x| !x.trim().is_empty())
                    .map(|x| parse_f64("scan.epsilons", x))
                    .collect::<Result<_, _>>()?;
                v
            }
            (None, Some(s)) => {
                let p: Vec<&str> = s.split(',').collect();
                if p.len() != 3 {
                    return Err(cfg_err("scan.epsilon_geometric = start,stop,count"));
                }
                let (a, b) = (parse_f64("scan.epsilon_geometric", p[0])?, parse_f64("scan.epsilon_geometric", p[1])?);
                let c = parse_usize("scan.epsilon_geometric", p[2])?;
                if !(a > b && b > 0.0 && c >= 2) {
                    return Err(cfg_err("scan.epsilon_geometric needs start > stop > 0 and count ≥ 2"));
                }
                asympt::geometric_epsilons(a, b, c)
            }
            (None, None) => asympt::geometric_epsilons(0.4, 0.05, 7),
        };
        if epsilons.is_empty() {
            return Err(cfg_err("scan ε list is empty"));
        }
        if epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(cfg_err("scan ε list must be positive and strictly decreasing"));
        }
        let (planes, fixed_plane) = match get("scan.plane").unwrap_or("both") {
            "horizontal" | "horizontal_random" => (Planes::Horizontal, None),
            "sigma0" => (Planes::Sigma0, None),
            "both" => (Planes::Both, None),
            s if s.starts_with("horizontal_fixed:") => {
                let v = parse_vector(&s["horizontal_fixed:".len()..]).map_err(cfg_err)?;
                if v.len() != dim {
                    return Err(cfg_err("scan.plane vector has the wrong dimension"));
                }
                (Planes::Horizontal, Some(v))
            }
            other => return Err(cfg_err(format!("scan.plane: unknown value {other:?}"))),
        };
        let default_anchor = domain
            .affine_map
            .as_ref()
            .map(|m| m.translation.clone())
            .unwrap_or_else(|| vec![C64::new(0.0, 0.0); dim]);
        let anchor = match vecs("scan.anchor")? {
            Some(mut v) if v.len() == 1 && v[0].len() == dim => v.remove(0),
            Some(_) => return Err(cfg_err("scan.anchor must be one vector of length domain.dim")),
            None => default_anchor,
        };
        let directions = vecs("scan.directions")?.unwrap_or_else(|| {
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[0] = C64::new(1.0, 0.0);
            vec![e]
        });
        if directions.is_empty() || directions.iter().any(|d| d.len() != dim || d.iter().all(|c| c.norm() == 0.0)) {
            return Err(cfg_err("scan.directions must be nonzero vectors of length domain.dim"));
        }
        let check_dims = |k: &str, pts: &[Vec<C64>]| -> Result<(), CliError> {
            if pts.iter().any(|p| p.len() != dim) {
                Err(cfg_err(format!("{k}: points must have length domain.dim")))
            } else {
                Ok(())
            }
        };
        let kernel_points = vecs("kernel.points")?.unwrap_or_else(|| vec![vec![C64::new(0.0, 0.0); dim]]);
        check_dims("kernel.points", &kernel_points)?;
        let verify_points = vecs("verify.points")?.unwrap_or_default();
        check_dims("verify.points", &verify_points)?;
        let fit_rows = get("scan.fit_rows").map(|s| parse_usize("scan.fit_rows", s)).transpose()?.unwrap_or(3);
        if fit_rows < 2 {
            return Err(cfg_err("scan.fit_rows must be at least 2"));
        }
        let jobs = get("run.jobs").map(|s| parse_usize("run.jobs", s)).transpose()?;
        if jobs == Some(0) {
            return Err(cfg_err("run.jobs must be positive"));
        }
        Ok(RunConfig {
            domain,
            series_tol: positive("domain.series_tol", series_tol)?,
            phi,
            kernel_points,
            identities,
            verify_points,
            random_points: get("verify.random_points")
                .map(|s| parse_usize("verify.random_points", s))
                .transpose()?
                .unwrap_or(10),
            epsilon_min,
            epsilon_max,
            identity_tol: positive("verify.identity_tol", 1e-6)?,
            pairing: positive("verify.pairing", LEVI_PAIRING)?,
            anchor,
            directions,
            epsilons,
            planes,
            fixed_plane,
            fit_rows,
            scan_tol: positive("scan.scan_tol", 1e-2)?,
            seed: get("run.seed")
                .map(|s| s.trim().parse::<u64>().map_err(|_| cfg_err("run.seed: bad integer")))
                .transpose()?
                .unwrap_or(0),
            out_dir: PathBuf::from(get("output.dir").unwrap_or("bergman-lab-out")),
            cache_dir: get("cache.dir").map(PathBuf::from),
            jobs,
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, out: Option<PathBuf>, jobs: Option<usize>, seed: Option<u64>) -> Result<RunConfig, CliError> {
        if let Some(o) = out {
            self.out_dir = o;
        }
        if let Some(j) = jobs {
            if j == 0 {
                return Err(cfg_err("--jobs must be positive"));
            }
            self.jobs = Some(j);
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        Ok(self)
    }

    /// `BERGMAN_LAB_CACHE` wins over `cache.dir`.
    pub fn effective_cache_dir(&self) -> Option<PathBuf> {
        domains::cache_dir_from_env().or_else(|| self.cache_dir.clone())
    }

    pub fn build_model(&self) -> Result<KernelModel, CliError> {
        let cache = self.effective_cache_dir();
        KernelModel::build(self.domain.clone(), cache.as_deref())
            .map(|m| m.with_series_tol(self.series_tol))
            .map_err(compute_err)
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_point(z: &[C64]) -> String {
    z.iter()
        .map(|c| format!("{}{:+.16e}i", fmt_f64(c.re), c.im))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| compute_err(format!("cannot create {}: {e}", dir.display())))?;
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| compute_err(format!("cannot write {}: {e}", p.display())))?;
    Ok(p)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build().map_err(compute_err)?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelRow {
    pub point: Vec<C64>,
    pub k: f64,
    pub log_k: f64,
    pub phi: f64,
    /// `None` where the foliation is undefined (e.g. a critical point of φ).
    pub r: Option<f64>,
    pub f: Option<f64>,
    pub tail_estimate: f64,
    pub jet_max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub schema_version: u32,
    pub domain: String,
    pub rows: Vec<KernelRow>,
}

pub fn cmd_kernel(cfg: &RunConfig) -> Result<KernelReport, CliError> {
    let model = cfg.build_model()?;
    let mut rows = Vec::new();
    for z in &cfg.kernel_points {
        let kj = model.kernel_jet(z).map_err(compute_err)?;
        let phi = domains::defining_function(&kj.k).map_err(compute_err)?;
        let fol = Foliation::new(phi.clone()).ok();
        let k = kj.k.value().re;
        rows.push(KernelRow {
            point: z.clone(),
            k,
            log_k: k.ln(),
            phi: phi.value().re,
            r: fol.as_ref().map(|f| f.r.value().re),
            f: fol.as_ref().map(|f| f.f().value().re),
            tail_estimate: kj.tail_estimate,
            jet_max_abs: kj.k.max_abs(),
        });
    }
    Ok(KernelReport {
        schema_version: SCHEMA_VERSION,
        domain: cfg.domain.kind.name().to_string(),
        rows,
    })
}

pub fn kernel_table(rep: &KernelReport) -> String {
    let mut s = String::from("point,K,log_K,phi,r,f,tail_estimate,jet_max_abs\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "NA".into());
    for r in &rep.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_point(&r.point),
            fmt_f64(r.k),
            fmt_f64(r.log_k),
            fmt_f64(r.phi),
            opt(r.r),
            opt(r.f),
            fmt_f64(r.tail_estimate),
            fmt_f64(r.jet_max_abs)
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub identity_id: String,
    pub point: Vec<C64>,
    pub residual: Option<f64>,
    pub relative_residual: Option<f64>,
    /// `pass`, `fail`, or `skipped:<reason>`.
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub domain: String,
    pub phi: String,
    pub identity_tol: f64,
    pub seed: u64,
    pub rows: Vec<VerifyRow>,
    pub worst_relative: BTreeMap<String, f64>,
    pub pass: bool,
}

/// Collar points at `φ = −ε` for ε drawn between the configured bounds.
pub fn verify_points(cfg: &RunConfig, model: Option<&KernelModel>) -> Result<Vec<Vec<C64>>, CliError> {
    let mut pts = cfg.verify_points.clone();
    let n = cfg.domain.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draws = Vec::new();
    for _ in 0..cfg.random_points {
        let dir: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let eps = if cfg.epsilon_max > cfg.epsilon_min {
            rng.gen_range(cfg.epsilon_min..cfg.epsilon_max)
        } else {
            cfg.epsilon_min
        };
        draws.push((dir, eps));
    }
    let located: Vec<Result<Vec<C64>, CliError>> = draws
        .par_iter()
        .map(|(dir, eps)| match cfg.phi {
            PhiSource::Sphere => {
                let norm: f64 = dir.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let rad = (1.0 - eps).max(0.0).sqrt();
                Ok(dir.iter().map(|v| v * (rad / norm)).collect())
            }
            PhiSource::Bergman => {
                let model = model.expect("Bergman verification builds a model");
                asympt::locate_level(model, &cfg.anchor, dir, *eps).map_err(compute_err)
            }
        })
        .collect();
    for p in located {
        pts.push(p?);
    }
    Ok(pts)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let model = match cfg.phi {
        PhiSource::Bergman => Some(cfg.build_model()?),
        PhiSource::Sphere => None,
    };
    let pts = verify_points(cfg, model.as_ref())?;
    let per_point: Vec<Result<Vec<VerifyRow>, CliError>> = pts
        .par_iter()
        .map(|z| {
            let geo = match (&cfg.phi, &model) {
                (PhiSource::Bergman, Some(m)) => {
                    let kj = m.kernel_jet(z).map_err(compute_err)?;
                    let mut g = Geometry::bergman_with_pairing(&kj.k, cfg.pairing).map_err(compute_err)?;
                    g.tail_estimate = kj.tail_estimate;
                    g
                }
                _ => {
                    let fol = Foliation::with_pairing(crfoliation::sphere_phi(z), cfg.pairing).map_err(compute_err)?;
                    Geometry {
                        fol,
                        metric: None,
                        tail_estimate: 0.0,
                    }
                }
            };
            Ok(cfg
                .identities
                .iter()
                .map(|&id| match geo.check(id) {
                    Ok(r) => {
                        let rel = r.relative();
                        VerifyRow {
                            identity_id: id.name().to_string(),
                            point: z.clone(),
                            residual: Some(r.residual),
                            relative_residual: Some(rel),
                            status: if rel < cfg.identity_tol { "pass" } else { "fail" }.to_string(),
                        }
                    }
                    Err(CheckError::NotBergmanPhi(_)) => VerifyRow {
                        identity_id: id.name().to_string(),
                        point: z.clone(),
                        residual: None,
                        relative_residual: None,
                        status: "skipped:NotBergmanPhi".to_string(),
                    },
                    Err(e) => VerifyRow {
                        identity_id: id.name().to_string(),
                        point: z.clone(),
                        residual: None,
                        relative_residual: None,
                        status: format!("fail:{e}"),
                    },
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        if let Some(v) = r.relative_residual {
            let e = worst.entry(r.identity_id.clone()).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let pass = rows.iter().all(|r| r.status == "pass" || r.status.starts_with("skipped"));
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        domain: cfg.domain.kind.name().to_string(),
        phi: match cfg.phi {
            PhiSource::Bergman => "bergman",
            PhiSource::Sphere => "sphere",
        }
        .to_string(),
        identity_tol: cfg.identity_tol,
        seed: cfg.seed,
        rows,
        worst_relative: worst,
        pass,
    })
}

pub fn verify_csv(rep: &VerifyReport) -> String {
    let mut s = String::from("identity_id,point,residual,relative_residual,pass\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "NA".into());
    for r in &rep.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.identity_id,
            fmt_point(&r.point),
            opt(r.residual),
            opt(r.relative_residual),
            r.status.replace(',', ";")
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct KlembeckSummary {
    pub schema_version: u32,
    pub domain: String,
    pub dim: usize,
    pub degree: usize,
    pub target: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub scans: Vec<RayScan>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayScan {
    /// Index into `scan.directions`.
    pub ray: usize,
    #[serde(flatten)]
    pub report: ScanReport,
}

pub fn cmd_klembeck(cfg: &RunConfig) -> Result<KlembeckSummary, CliError> {
    let model = cfg.build_model()?;
    let mut planes = Vec::new();
    if matches!(cfg.planes, Planes::Horizontal | Planes::Both) {
        planes.push(match &cfg.fixed_plane {
            Some(v) => PlaneChoice::HorizontalFixed(v.clone()),
            None => PlaneChoice::HorizontalRandom,
        });
    }
    if matches!(cfg.planes, Planes::Sigma0 | Planes::Both) {
        planes.push(PlaneChoice::Sigma0);
    }
    let mut scans = Vec::new();
    for (i, dir) in cfg.directions.iter().enumerate() {
        for plane in &planes {
            let ray = RaySpec::new(cfg.anchor.clone(), dir, cfg.epsilons.clone(), plane.clone(), cfg.seed.wrapping_add(i as u64))
                .map_err(|e| cfg_err(e.to_string()))?;
            scans.push(RayScan {
                ray: i,
                report: asympt::scan(&model, &ray, cfg.fit_rows, cfg.scan_tol).map_err(compute_err)?,
            });
        }
    }
    let pass = scans.iter().all(|s| s.report.pass);
    Ok(KlembeckSummary {
        schema_version: SCHEMA_VERSION,
        domain: cfg.domain.kind.name().to_string(),
        dim: cfg.domain.dim,
        degree: cfg.domain.truncation_degree,
        target: asympt::klembeck_target(cfg.domain.dim),
        tolerance: cfg.scan_tol,
        seed: cfg.seed,
        scans,
        pass,
    })
}

pub fn klembeck_csv(sum: &KlembeckSummary) -> String {
    let mut s = String::from("ray,plane,epsilon,k_g_H,k_g_sigma0,k_theta,r,f,phi_over_f,L1,L2,tail_estimate\n");
    for rs in &sum.scans {
        let scan = &rs.report;
        for row in &scan.rows {
            let x = &row.sample;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                rs.ray,
                scan.plane,
                fmt_f64(x.epsilon),
                fmt_f64(x.k_g_h),
                fmt_f64(x.k_g_sigma0),
                fmt_f64(x.k_theta),
                fmt_f64(x.r),
                fmt_f64(x.f),
                fmt_f64(x.phi_over_f),
                fmt_f64(x.l1),
                fmt_f64(x.l2),
                fmt_f64(x.tail_estimate)
            );
        }
    }
    s
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(compute_err)
}

/// Runs one command, writes its reports, and returns the exit code.
pub fn execute(cmd: Command, cfg: &RunConfig) -> i32 {
    let result = with_pool(cfg.jobs, || run(cmd, cfg)).and_then(|r| r);
    match result {
        Ok(pass) => {
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("bergman-lab: {e}");
            e.exit_code()
        }
    }
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<bool, CliError> {
    match cmd {
        Command::Kernel => {
            let rep = cmd_kernel(cfg)?;
            let table = kernel_table(&rep);
            print!("{table}");
            write_out(&cfg.out_dir, "kernel.csv", &table)?;
            write_out(&cfg.out_dir, "kernel.json", &to_json(&rep)?)?;
            Ok(true)
        }
        Command::Verify => {
            let rep = cmd_verify(cfg)?;
            write_out(&cfg.out_dir, "verify.csv", &verify_csv(&rep))?;
            write_out(&cfg.out_dir, "verify.json", &to_json(&rep)?)?;
            for (id, w) in &rep.worst_relative {
                println!("{id:>14}  worst relative residual {w:.3e}");
            }
            let skipped = rep.rows.iter().filter(|r| r.status.starts_with("skipped")).count();
            if skipped > 0 {
                println!("{skipped} checks skipped (NotBergmanPhi)");
            }
            println!("verify: {}", if rep.pass { "PASS" } else { "FAIL" });
            Ok(rep.pass)
        }
        Command::Klembeck => {
            let sum = cmd_klembeck(cfg)?;
            write_out(&cfg.out_dir, "klembeck.csv", &klembeck_csv(&sum))?;
            write_out(&cfg.out_dir, "klembeck.json", &to_json(&sum)?)?;
            for rs in &sum.scans {
                let (i, s) = (rs.ray, &rs.report);
                println!(
                    "ray {i} {:>17}: limit {:+.6} (target {:+.6}) L1 {:+.4} L2 {:+.4} {}",
                    s.plane,
                    s.extrapolated_limit,
                    s.target,
                    s.limits.l1.limit,
                    s.limits.l2.limit,
                    if s.pass { "pass" } else { "FAIL" }
                );
            }
            println!("klembeck: {}", if sum.pass { "PASS" } else { "FAIL" });
            Ok(sum.pass)
        }
    }
}
