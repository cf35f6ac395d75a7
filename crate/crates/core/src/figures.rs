//! Data behind the figures: value grids, level-set segments, region rasters,
//! and trajectory overlays. Each figure is a set of named text files plus a
//! matplotlib script that renders them.

use std::fmt::Write as _;

use serde_json::json;

use crate::clf::{self, psi, ClfId};
use crate::controllers::{ControllerSpec, Epsilon};
use crate::dynamics::{open_loop_invariant, ModelId, PopulationState};
use crate::error::{Error, Result};
use crate::simulator::{integrate, IntegratorConfig};
use crate::verifier::{classify_regions, DomainGrid};

/// Invariant levels drawn for the open-loop orbits.
pub const OPEN_LOOP_LEVELS: [f64; 4] = [2.1, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    OpenLoop,
    VSf,
    PsiCurves,
    VBoth,
    VBothLevels,
    RegionForwarding,
    RegionBackstepping,
    BacksteppingLevels,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::OpenLoop,
        FigureId::VSf,
        FigureId::PsiCurves,
        FigureId::VBoth,
        FigureId::VBothLevels,
        FigureId::RegionForwarding,
        FigureId::RegionBackstepping,
        FigureId::BacksteppingLevels,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureId::OpenLoop => "open-loop",
            FigureId::VSf => "V-sf",
            FigureId::PsiCurves => "psi-curves",
            FigureId::VBoth => "V-both",
            FigureId::VBothLevels => "V-both-levels",
            FigureId::RegionForwarding => "region-forwarding",
            FigureId::RegionBackstepping => "region-backstepping",
            FigureId::BacksteppingLevels => "backstepping-levels",
        }
    }

    pub fn parse(s: &str) -> Result<Vec<FigureId>> {
        if s == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Self::ALL
            .iter()
            .find(|f| f.name() == s)
            .map(|f| vec![*f])
            .ok_or_else(|| Error::Parse(format!("unknown figure id '{s}'")))
    }
}

/// One emitted file, path relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureFile {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone, Copy)]
pub struct FigureParams {
    /// Gain for the simultaneous-harvest value grid.
    pub eps_grid: Epsilon,
    /// Gain for the level-set and trajectory overlay.
    pub eps_levels: Epsilon,
    pub rel_tol: f64,
}

impl Default for FigureParams {
    fn default() -> Self {
        Self {
            eps_grid: Epsilon::new(0.5).expect("valid"),
            eps_levels: Epsilon::new(0.9).expect("valid"),
            rel_tol: 1e-10,
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `X,Y,V` on a log grid.
pub fn value_grid_csv(id: ClfId, grid: &DomainGrid) -> String {
    let mut out = String::from("X,Y,V\n");
    for s in grid.points() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt17(s.prey()),
            fmt17(s.predator()),
            fmt17(clf::value(id, s))
        );
    }
    out
}

/// `S,psi_S,psi_inv_S` on `[0.05, 5]`.
pub fn psi_curves_csv(samples: usize) -> String {
    let mut out = String::from("S,psi_S,psi_inv_S\n");
    for k in 0..samples {
        let s = 0.05 + (5.0 - 0.05) * k as f64 / (samples - 1) as f64;
        let a = psi(s).expect("positive abscissa");
        let b = psi(1.0 / s).expect("positive abscissa");
        let _ = writeln!(out, "{},{},{}", fmt17(s), fmt17(a), fmt17(b));
    }
    out
}

/// Level-set segments of `f` over a log grid by marching squares,
/// interpolated in log coordinates.
pub fn level_segments<F>(f: F, grid: &DomainGrid, levels: &[f64]) -> Vec<(f64, [f64; 4])>
where
    F: Fn(PopulationState) -> f64,
{
    let ax = grid.log_axis();
    let n = ax.len();
    let vals: Vec<f64> = grid.points().into_iter().map(&f).collect();
    let at = |i: usize, j: usize| vals[j * n + i];
    let mut segs = Vec::new();
    for &level in levels {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                // corners counter-clockwise from lower-left
                let c = [
                    (ax[i], ax[j], at(i, j)),
                    (ax[i + 1], ax[j], at(i + 1, j)),
                    (ax[i + 1], ax[j + 1], at(i + 1, j + 1)),
                    (ax[i], ax[j + 1], at(i, j + 1)),
                ];
                let mut crossings = Vec::with_capacity(4);
                for e in 0..4 {
                    let (p, q) = (c[e], c[(e + 1) % 4]);
                    if (p.2 < level) != (q.2 < level) {
                        let t = (level - p.2) / (q.2 - p.2);
                        crossings.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
                    }
                }
                let pairs: &[(usize, usize)] = match crossings.len() {
                    2 => &[(0, 1)],
                    4 => {
                        let centre = 0.25 * (c[0].2 + c[1].2 + c[2].2 + c[3].2);
                        if (centre < level) == (c[0].2 < level) {
                            &[(0, 1), (2, 3)]
                        } else {
                            &[(0, 3), (1, 2)]
                        }
                    }
                    _ => &[],
                };
                for &(a, b) in pairs {
                    let (pa, pb) = (crossings[a], crossings[b]);
                    segs.push((level, [pa.0.exp(), pa.1.exp(), pb.0.exp(), pb.1.exp()]));
                }
            }
        }
    }
    segs
}

fn segments_csv(segs: &[(f64, [f64; 4])]) -> String {
    let mut out = String::from("level,X1,Y1,X2,Y2\n");
    for (level, s) in segs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(*level),
            fmt17(s[0]),
            fmt17(s[1]),
            fmt17(s[2]),
            fmt17(s[3])
        );
    }
    out
}

/// State where `id` reaches `level` along the log-space ray from `(1, 1)`
/// in direction `theta`. Every catalog entry increases along such rays.
pub fn point_on_level(id: ClfId, level: f64, theta: f64) -> Result<PopulationState> {
    let at = |r: f64| PopulationState::new((r * theta.cos()).exp(), (r * theta.sin()).exp());
    let mut hi = 1.0;
    while clf::value(id, at(hi)?) < level {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::InvalidParameter {
                name: "level",
                value: level,
                reason: "level not reached along ray",
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clf::value(id, at(mid)?) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Prey concentration `X0 > 1` with `C(X0, 1) = level`.
pub fn open_loop_start(level: f64) -> Result<PopulationState> {
    let (mut lo, mut hi) = (1.0, 2.0);
    let c = |x: f64| open_loop_invariant(PopulationState::new(x, 1.0).expect("positive"));
    while c(hi) < level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if c(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PopulationState::new(0.5 * (lo + hi), 1.0)
}

fn script(name: &str, body: &str) -> FigureFile {
    FigureFile {
        path: format!("{name}/plot.py"),
        contents: format!(
            "# Renders {name} from the CSV files in this directory.\n\
             import csv, os\n\
             import matplotlib\n\
             matplotlib.use(\"Agg\")\n\
             import matplotlib.pyplot as plt\n\
             \n\
             HERE = os.path.dirname(os.path.abspath(__file__))\n\
             \n\
             def load(fname):\n\
             \x20   with open(os.path.join(HERE, fname)) as fh:\n\
             \x20       rows = list(csv.DictReader(fh))\n\
             \x20   return {{k: [float(r[k]) for r in rows] for k in rows[0]}}\n\
             \n\
             {body}\n\
             plt.savefig(os.path.join(HERE, \"{name}.png\"), dpi=150)\n"
        ),
    }
}

const SURFACE_BODY: &str = "d = load(\"V_grid.csv\")\n\
fig = plt.figure()\n\
ax = fig.add_subplot(projection=\"3d\")\n\
ax.plot_trisurf(d[\"X\"], d[\"Y\"], d[\"V\"], cmap=\"viridis\", linewidth=0)\n\
ax.scatter([1], [1], [0], color=\"blue\")\n\
ax.set_xlabel(\"X\"); ax.set_ylabel(\"Y\"); ax.set_zlabel(\"V\")";

const LEVELS_BODY: &str = "import glob\n\
s = load(\"levels.csv\")\n\
for i in range(len(s[\"level\"])):\n\
\x20   plt.plot([s[\"X1\"][i], s[\"X2\"][i]], [s[\"Y1\"][i], s[\"Y2\"][i]], color=\"gray\", lw=0.6)\n\
for f in sorted(glob.glob(os.path.join(HERE, \"traj_*.csv\"))):\n\
\x20   t = load(os.path.basename(f))\n\
\x20   plt.plot(t[\"X\"], t[\"Y\"], color=\"blue\")\n\
plt.plot([1], [1], \"bo\")\n\
plt.xscale(\"log\"); plt.yscale(\"log\"); plt.xlabel(\"X\"); plt.ylabel(\"Y\")";

const REGION_BODY: &str = "d = load(\"regions.csv\")\n\
col = [\"red\" if f else (\"pink\" if n else \"green\") for n, f in zip(d[\"u_negative\"], d[\"clf_failure\"])]\n\
plt.scatter(d[\"X\"], d[\"Y\"], c=col, s=2, marker=\"s\")\n\
plt.plot([1], [1], \"bo\")\n\
plt.xscale(\"log\"); plt.yscale(\"log\"); plt.xlabel(\"X\"); plt.ylabel(\"Y\")";

#[allow(clippy::too_many_arguments)]
fn level_figure(
    name: &str,
    id: ClfId,
    model: ModelId,
    ctrl: ControllerSpec,
    levels: &[f64],
    start_level: f64,
    t_end: f64,
    rel_tol: f64,
) -> Result<Vec<FigureFile>> {
    let grid = DomainGrid::new(3.0, 241)?;
    let segs = level_segments(|s| clf::value(id, s), &grid, levels);
    let mut files = vec![FigureFile {
        path: format!("{name}/levels.csv"),
        contents: segments_csv(&segs),
    }];
    let cfg = IntegratorConfig {
        samples: 1001,
        ..IntegratorConfig::with_tolerance(t_end, rel_tol)
    };
    let mut starts = Vec::new();
    for k in 0..6 {
        let theta = std::f64::consts::TAU * (k as f64 + 0.5) / 6.0;
        let s0 = point_on_level(id, start_level, theta)?;
        starts.push(vec![s0.prey(), s0.predator()]);
        let tr = integrate(model, ctrl, s0, &cfg)?.with_clf(id);
        files.push(FigureFile {
            path: format!("{name}/traj_{k:02}.csv"),
            contents: tr.to_csv(),
        });
    }
    files.push(FigureFile {
        path: format!("{name}/meta.json"),
        contents: serde_json::to_string_pretty(&json!({
            "clf": id.to_string(),
            "controller": ctrl.to_string(),
            "model": model.name(),
            "levels": levels,
            "initial_conditions": starts,
            "initial_condition_rule": format!("V = {start_level} along six log-space rays at angles (k + 1/2) * 60 deg"),
            "t_end": t_end,
            "rel_tol": rel_tol,
        }))
        .expect("json"),
    });
    files.push(script(name, LEVELS_BODY));
    Ok(files)
}

/// All files for one figure.
pub fn generate(fig: FigureId, p: &FigureParams) -> Result<Vec<FigureFile>> {
    let name = fig.name();
    let files = match fig {
        FigureId::OpenLoop => {
            let cfg = IntegratorConfig {
                samples: 2001,
                ..IntegratorConfig::with_tolerance(20.0, p.rel_tol)
            };
            let mut files = Vec::new();
            let mut starts = Vec::new();
            for (k, &level) in OPEN_LOOP_LEVELS.iter().enumerate() {
                let s0 = open_loop_start(level)?;
                starts.push(vec![s0.prey(), s0.predator()]);
                for (m, model) in ModelId::ALL.iter().enumerate() {
                    let tr = integrate(*model, ControllerSpec::OPEN_LOOP, s0, &cfg)?
                        .with_clf(ClfId::VSfStrict);
                    files.push(FigureFile {
                        path: format!("{name}/traj_m{}_{k:02}.csv", m + 1),
                        contents: tr.to_csv(),
                    });
                }
            }
            files.push(FigureFile {
                path: format!("{name}/V_grid.csv"),
                contents: value_grid_csv(ClfId::VSfStrict, &DomainGrid::new(2.0, 81)?),
            });
            let grid = DomainGrid::new(3.0, 241)?;
            let segs = level_segments(open_loop_invariant, &grid, &OPEN_LOOP_LEVELS);
            files.push(FigureFile {
                path: format!("{name}/levels.csv"),
                contents: segments_csv(&segs),
            });
            files.push(FigureFile {
                path: format!("{name}/meta.json"),
                contents: serde_json::to_string_pretty(&json!({
                    "invariant": "X + Y - ln(XY)",
                    "levels": OPEN_LOOP_LEVELS,
                    "initial_conditions": starts,
                    "initial_condition_rule": "Y0 = 1, X0 > 1 on each level",
                    "input": 1.0,
                    "models": ModelId::ALL.iter().map(|m| m.name()).collect::<Vec<_>>(),
                    "trajectory_files": "traj_m<model>_<level index>.csv",
                }))
                .expect("json"),
            });
            files.push(script(name, LEVELS_BODY));
            files
        }
        FigureId::VSf => vec![
            FigureFile {
                path: format!("{name}/V_grid.csv"),
                contents: value_grid_csv(ClfId::VSfStrict, &DomainGrid::new(2.0, 81)?),
            },
            script(name, SURFACE_BODY),
        ],
        FigureId::PsiCurves => vec![
            FigureFile {
                path: format!("{name}/psi.csv"),
                contents: psi_curves_csv(500),
            },
            script(
                name,
                "d = load(\"psi.csv\")\n\
                 plt.plot(d[\"S\"], d[\"psi_S\"], color=\"blue\", label=\"Psi(S)\")\n\
                 plt.plot(d[\"S\"], d[\"psi_inv_S\"], color=\"red\", label=\"Psi(1/S)\")\n\
                 plt.ylim(0, 10); plt.xlabel(\"S\"); plt.legend()",
            ),
        ],
        FigureId::VBoth => vec![
            FigureFile {
                path: format!("{name}/V_grid.csv"),
                contents: value_grid_csv(
                    ClfId::VBothStrict(p.eps_grid),
                    &DomainGrid::new(2.0, 81)?,
                ),
            },
            FigureFile {
                path: format!("{name}/meta.json"),
                contents: serde_json::to_string_pretty(&json!({
                    "clf": ClfId::VBothStrict(p.eps_grid).to_string(),
                    "eps": p.eps_grid.value(),
                }))
                .expect("json"),
            },
            script(name, SURFACE_BODY),
        ],
        FigureId::VBothLevels => {
            let e = p.eps_levels;
            level_figure(
                name,
                ClfId::VBothStrict(e),
                ModelId::SimultaneousHarvest,
                ControllerSpec::MixedLinear(e),
                &[0.05, 0.2, 0.5, 1.0, 2.0, 4.0],
                2.0,
                60.0,
                p.rel_tol,
            )?
        }
        FigureId::BacksteppingLevels => level_figure(
            name,
            ClfId::VBackstepping,
            ModelId::PredatorOnlyHarvest,
            ControllerSpec::BacksteppingPositive,
            &[0.05, 0.2, 0.5, 1.0, 2.0, 4.0],
            2.0,
            30.0,
            p.rel_tol,
        )?,
        FigureId::RegionForwarding | FigureId::RegionBackstepping => {
            let (ctrl, id) = if fig == FigureId::RegionForwarding {
                (ControllerSpec::ForwardingFeedback, ClfId::VForwarding)
            } else {
                (ControllerSpec::BacksteppingPositive, ClfId::VBackstepping)
            };
            let map = classify_regions(&DomainGrid::new(3.0, 200)?, ctrl, id)?;
            vec![
                FigureFile {
                    path: format!("{name}/regions.csv"),
                    contents: map.to_csv(),
                },
                FigureFile {
                    path: format!("{name}/meta.json"),
                    contents: serde_json::to_string_pretty(&json!({
                        "controller": ctrl.to_string(),
                        "clf": id.to_string(),
                        "grid_a": 3.0,
                        "grid_n": 200,
                        "u_negative_points": map.count_u_negative(),
                        "clf_failure_points": map.count_clf_failure(),
                        "legend": {"green": "U > 0", "pink": "U < 0", "red": "L > 0 and G > 0"},
                    }))
                    .expect("json"),
                },
                script(name, REGION_BODY),
            ]
        }
    };
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_curve_red_dominates_below_one() {
        let csv = psi_curves_csv(500);
        let mut checked = 0;
        for line in csv.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            if v[0] < 1.0 {
                assert!(v[2] > v[1], "S = {}", v[0]);
                checked += 1;
            } else if v[0] > 1.0 {
                assert!(v[1] > v[2], "S = {}", v[0]);
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn level_points_hit_their_level() {
        let id = ClfId::VBothStrict(Epsilon::new(0.9).unwrap());
        for k in 0..6 {
            let s = point_on_level(id, 2.0, k as f64).unwrap();
            assert!((clf::value(id, s) - 2.0).abs() < 1e-9);
        }
        let s = open_loop_start(2.5).unwrap();
        assert!((open_loop_invariant(s) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn marching_squares_on_a_circle() {
        let grid = DomainGrid::new(1.0, 101).unwrap();
        let segs = level_segments(
            |s| {
                let l = s.to_log();
                l.x * l.x + l.y * l.y
            },
            &grid,
            &[0.25],
        );
        assert!(segs.len() > 50);
        for (_, s) in segs {
            for (x, y) in [(s[0], s[1]), (s[2], s[3])] {
                let r = x.ln().hypot(y.ln());
                assert!((r - 0.5).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn unknown_figure_rejected() {
        assert!(FigureId::parse("fig-99").is_err());
        assert_eq!(FigureId::parse("all").unwrap().len(), 8);
    }
}
