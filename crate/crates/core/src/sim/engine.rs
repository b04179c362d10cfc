use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, SensorMode};
use super::integrate::rk4_step;
use crate::error::{Error, Result};
use crate::governor::{project_goal, ControllerMode, RobotGovernorState, SafeZoneController};
use crate::metric::quad_norm_sq;
use crate::path::PathPolyline;
use crate::planner::{astar_plan, path_hits_new_obstacles, PlanRequest, ReplanPolicy};
use crate::world::{simulate_lidar, ClearanceSource, LidarScan, OccupancyGrid};

pub const CSV_HEADER: &str = "t,x,y,vx,vy,gx,gy,gbarx,gbary,alpha,deltaE,bound,dist2obs,q11,q12,q22";

const SNAPSHOT_INTERVAL: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    GoalReached,
    Timeout,
    Collision,
    PlanningFailure,
    NumericalBlowup,
    SensorError,
}

impl RunStatus {
    pub fn succeeded(&self) -> bool {
        *self == RunStatus::GoalReached
    }
}

/// One control update.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub g: [f64; 2],
    pub gbar: [f64; 2],
    pub alpha: f64,
    pub delta_e: f64,
    pub bound: f64,
    pub dist_sq_obs: f64,
    /// `q11, q12, q22` of the metric used for the zone.
    pub q: [f64; 3],
    /// Largest `‖x(τ) − g‖²_Q` seen until the next update, with `g` and `Q` from this record.
    pub replay_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub mode: ControllerMode,
    pub status: RunStatus,
    pub message: Option<String>,
    pub time_to_goal: Option<f64>,
    pub sim_time: f64,
    /// Distance traveled by the robot.
    pub path_length: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
    /// `null` when a bound could not be certified.
    pub min_delta_e: Option<f64>,
    pub min_clearance: f64,
    pub collision: bool,
    pub control_steps: u64,
    pub replans: u64,
    pub final_position: [f64; 2],
    pub final_speed: f64,
}

/// A successful (re)plan: where the governor was and where the new path starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanEvent {
    pub t: f64,
    pub governor: [f64; 2],
    pub path_start: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSnapshot {
    pub t: f64,
    pub pgm: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<LogRecord>,
    pub metrics: RunMetrics,
    pub snapshots: Vec<GridSnapshot>,
    pub replan_events: Vec<ReplanEvent>,
    /// Navigation path in force at the end of the run.
    pub path: Vec<[f64; 2]>,
}

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.x[0],
                r.x[1],
                r.v[0],
                r.v[1],
                r.g[0],
                r.g[1],
                r.gbar[0],
                r.gbar[1],
                r.alpha,
                r.delta_e,
                r.bound,
                r.dist_sq_obs,
                r.q[0],
                r.q[1],
                r.q[2]
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Side-by-side metrics of both controllers on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub sddm: RunMetrics,
    pub euclidean: RunMetrics,
    /// `euclidean.time_to_goal / sddm.time_to_goal` when both reached the goal.
    pub speedup: Option<f64>,
}

fn arr(v: &DVector<f64>) -> [f64; 2] {
    [v[0], v[1]]
}

fn dv(p: [f64; 2]) -> DVector<f64> {
    DVector::from_column_slice(&p)
}

fn v2(p: &DVector<f64>) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

struct Outcome {
    status: RunStatus,
    message: Option<String>,
}

impl Outcome {
    fn fail(status: RunStatus, e: &Error) -> Self {
        log::warn!("run ended with {status:?}: {e}");
        Self {
            status,
            message: Some(e.to_string()),
        }
    }
}

/// Runs one scenario to goal, timeout or failure. Runtime failures end up in
/// the metrics status; only an invalid configuration is returned as an error.
pub fn run_scenario(cfg: &ScenarioConfig, grid_snapshots: bool) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let world = cfg.world()?;
    let gains = cfg.controller.gains()?;
    let controller = SafeZoneController::new(gains, 2)?;
    let mode = cfg.controller.mode;
    let bound_choice = cfg.controller.bound;
    let sim = &cfg.sim;
    let lidar = cfg.sensor.mode == SensorMode::Lidar;
    let policy = ReplanPolicy {
        period: sim.replan_period,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut grid = if lidar {
        OccupancyGrid::new(&world.bounds, cfg.grid.resolution, cfg.grid.inflation)?
    } else {
        OccupancyGrid::from_obstacles(&world, cfg.grid.resolution, cfg.grid.inflation)?
    };
    let goal = Vector2::new(cfg.goal[0], cfg.goal[1]);
    let mut path: Option<PathPolyline> = match &cfg.path {
        Some(p) => Some(PathPolyline::new(p.iter().map(|&w| dv(w)).collect())?),
        None => None,
    };
    let fixed_path = path.is_some();

    let mut state = RobotGovernorState::at_rest(dv(cfg.start));
    let mut gbar = state.g.clone();
    let mut alpha = 0.0;
    let mut scan: Option<LidarScan> = None;
    let mut next_scan = 0.0;
    let mut next_snapshot = 0.0;
    let mut records: Vec<LogRecord> = Vec::new();
    let mut snapshots = Vec::new();
    let mut replan_events = Vec::new();
    let mut replay_ref: Option<(DVector<f64>, DMatrix<f64>)> = None;
    let (mut tick, mut step, mut replans) = (0u64, 0u64, 0u64);
    let mut traveled = 0.0;
    let mut max_speed: f64 = 0.0;
    let mut min_clearance = world.clearance(&v2(&state.x));
    let mut time_to_goal = None;

    let outcome = loop {
        let t = step as f64 * sim.dt;
        state.t = t;
        if step % sim.control_period == 0 {
            let mut newly = Vec::new();
            if lidar && t + 1e-9 >= next_scan {
                let s = match simulate_lidar(&world, v2(&state.x), cfg.sensor.beams, cfg.sensor.range_max)
                    .and_then(|s| s.with_range_noise(cfg.sensor.noise_sigma, &mut rng))
                {
                    Ok(s) => s,
                    Err(e) => break Outcome::fail(RunStatus::SensorError, &e),
                };
                newly = grid.integrate_scan_in_place(&s);
                scan = Some(s);
                while next_scan <= t + 1e-9 {
                    next_scan += 1.0 / cfg.sensor.rate_hz;
                }
            }

            if !fixed_path {
                let blocked = path
                    .as_ref()
                    .is_some_and(|p| path_hits_new_obstacles(p, alpha, &grid, &newly));
                if path.is_none() || (lidar && policy.should_replan(tick, blocked)) {
                    let inflated = grid.inflate();
                    let req = PlanRequest {
                        start: v2(&state.g),
                        goal,
                        grid: &inflated,
                        unknown_is_free: cfg.grid.unknown_is_free,
                    };
                    match astar_plan(&req) {
                        Ok(plan) => {
                            replan_events.push(ReplanEvent {
                                t,
                                governor: arr(&state.g),
                                path_start: arr(plan.path.start()),
                            });
                            path = Some(plan.path);
                            alpha = 0.0;
                            replans += 1;
                        }
                        Err(e) if path.is_some() => log::debug!("replan at t = {t:.3} failed, keeping path: {e}"),
                        Err(e) => break Outcome::fail(RunStatus::PlanningFailure, &e),
                    }
                }
            }
            let current_path = path.as_ref().expect("path planned or given");

            if grid_snapshots && t + 1e-9 >= next_snapshot {
                snapshots.push(GridSnapshot { t, pgm: grid.to_pgm() });
                next_snapshot += SNAPSHOT_INTERVAL;
            }

            let zone = match scan.as_ref() {
                Some(s) if lidar => controller.safe_zone(&state, &ClearanceSource::Lidar(s), mode, bound_choice),
                _ => controller.safe_zone(&state, &ClearanceSource::Geometric(&world), mode, bound_choice),
            };
            let zone = match zone {
                Ok(z) => z,
                Err(e) => break Outcome::fail(RunStatus::NumericalBlowup, &e),
            };
            let (a, gb) = project_goal(current_path, &zone, alpha);
            alpha = a;
            gbar = gb;
            let q = &zone.zone.shape;
            let x_err = &state.x - &state.g;
            records.push(LogRecord {
                t,
                x: arr(&state.x),
                v: arr(&state.v),
                g: arr(&state.g),
                gbar: arr(&gbar),
                alpha,
                delta_e: zone.delta_e,
                bound: zone.bound.value,
                dist_sq_obs: zone.dist_sq_obs,
                q: [q[(0, 0)], q[(0, 1)], q[(1, 1)]],
                replay_peak: quad_norm_sq(q, &x_err),
            });
            replay_ref = Some((state.g.clone(), q.clone()));

            if (v2(&state.x) - goal).norm() <= sim.goal_tolerance && state.v.norm() <= sim.speed_tolerance {
                time_to_goal = Some(t);
                break Outcome {
                    status: RunStatus::GoalReached,
                    message: None,
                };
            }
            if t >= sim.timeout {
                break Outcome {
                    status: RunStatus::Timeout,
                    message: Some(format!("goal not reached within {} s", sim.timeout)),
                };
            }
            tick += 1;
        }

        let next = match rk4_step(&state, &gbar, &gains, sim.dt) {
            Ok(s) => s,
            Err(e) => break Outcome::fail(RunStatus::NumericalBlowup, &e),
        };
        traveled += (&next.x - &state.x).norm();
        state = next;
        step += 1;
        max_speed = max_speed.max(state.v.norm());
        let p = v2(&state.x);
        min_clearance = min_clearance.min(world.clearance(&p));
        if let (Some((g0, q0)), Some(last)) = (&replay_ref, records.last_mut()) {
            last.replay_peak = last.replay_peak.max(quad_norm_sq(q0, &(&state.x - g0)));
        }
        if !world.is_free(&p) {
            break Outcome {
                status: RunStatus::Collision,
                message: Some(format!("collision at ({:.4}, {:.4}), t = {:.4}", p.x, p.y, state.t)),
            };
        }
    };

    if grid_snapshots {
        snapshots.push(GridSnapshot {
            t: state.t,
            pgm: grid.to_pgm(),
        });
    }
    let sim_time = state.t;
    let min_delta_e = records.iter().map(|r| r.delta_e).fold(f64::INFINITY, f64::min);
    let metrics = RunMetrics {
        scenario: cfg.name.clone(),
        mode,
        status: outcome.status,
        message: outcome.message,
        time_to_goal,
        sim_time,
        path_length: traveled,
        mean_speed: if sim_time > 0.0 { traveled / sim_time } else { 0.0 },
        max_speed,
        min_delta_e: min_delta_e.is_finite().then_some(min_delta_e),
        min_clearance,
        collision: outcome.status == RunStatus::Collision,
        control_steps: records.len() as u64,
        replans,
        final_position: arr(&state.x),
        final_speed: state.v.norm(),
    };
    Ok(TrajectoryLog {
        records,
        metrics,
        snapshots,
        replan_events,
        path: path
            .map(|p| p.waypoints().iter().map(arr).collect())
            .unwrap_or_default(),
    })
}

/// Runs the scenario with both controllers concurrently.
pub fn compare_controllers(
    cfg: &ScenarioConfig,
    grid_snapshots: bool,
) -> Result<(Comparison, TrajectoryLog, TrajectoryLog)> {
    let with_mode = |mode| {
        let mut c = cfg.clone();
        c.controller.mode = mode;
        c
    };
    let (a, b) = (with_mode(ControllerMode::Sddm), with_mode(ControllerMode::Euclidean));
    let (sddm, euclid) = std::thread::scope(|s| {
        let ha = s.spawn(|| run_scenario(&a, grid_snapshots));
        let hb = s.spawn(|| run_scenario(&b, grid_snapshots));
        (
            ha.join().expect("sddm run panicked"),
            hb.join().expect("euclidean run panicked"),
        )
    });
    let (sddm, euclid) = (sddm?, euclid?);
    let speedup = match (sddm.metrics.time_to_goal, euclid.metrics.time_to_goal) {
        (Some(ts), Some(te)) if ts > 0.0 => Some(te / ts),
        _ => None,
    };
    let cmp = Comparison {
        scenario: cfg.name.clone(),
        sddm: sddm.metrics.clone(),
        euclidean: euclid.metrics.clone(),
        speedup,
    };
    Ok((cmp, sddm, euclid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::ScenarioConfig;

    fn open_field() -> ScenarioConfig {
        ScenarioConfig::from_toml_str(
            r#"
            name = "open"
            start = [1.0, 5.0]
            goal = [6.0, 5.0]
            [bounds]
            min = [0.0, 0.0]
            max = [10.0, 10.0]
            "#,
            &[],
        )
        .unwrap()
    }

    #[test]
    fn zero_timeout_stops_immediately() {
        let mut cfg = open_field();
        cfg.sim.timeout = 0.0;
        let log = run_scenario(&cfg, false).unwrap();
        assert_eq!(log.metrics.status, RunStatus::Timeout);
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn open_field_reaches_goal() {
        let log = run_scenario(&open_field(), false).unwrap();
        assert_eq!(log.metrics.status, RunStatus::GoalReached, "{:?}", log.metrics);
        assert!(!log.metrics.collision);
        assert!(log.records.windows(2).all(|w| w[1].t > w[0].t));
        let csv = log.csv_string();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), log.records.len() + 1);
    }

    #[test]
    fn start_at_goal_finishes_at_once() {
        let mut cfg = open_field();
        cfg.goal = cfg.start;
        let log = run_scenario(&cfg, false).unwrap();
        assert_eq!(log.metrics.time_to_goal, Some(0.0));
    }

    #[test]
    fn unreachable_goal_is_planning_failure() {
        let mut cfg = open_field();
        cfg.segments = vec![crate::world::Segment {
            a: [4.0, 0.0],
            b: [4.0, 10.0],
        }];
        let log = run_scenario(&cfg, false).unwrap();
        assert_eq!(log.metrics.status, RunStatus::PlanningFailure);
    }
}
