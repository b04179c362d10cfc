//! Static worlds, simulated lidar and occupancy grids.

mod grid;
mod lidar;
mod obstacles;

pub use grid::{BresenhamLine, Cell, CellIndex, OccupancyGrid};
pub use lidar::{directional_clearance, simulate_lidar, ClearanceSource, LidarScan};
pub use obstacles::{Bounds, Disk, ObstacleSet, Segment};
