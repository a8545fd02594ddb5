//! Shortest collision-free paths around a disc and the waypoints a simulated
//! human would follow along them.
//!
//! cargo run --example wrap_geometry

use sa_scenarios::geometry::{path_length, segment_intersects_sphere, wrap_path_waypoints};
use sa_scenarios::{Sphere, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = Vec2::new(0.125, 0.4);
    let obstacle = Sphere::new(Vec2::new(0.125, 0.25), 0.05)?;

    for goal_x in [0.0, 0.1, 0.125, 0.2, 0.25] {
        let goal = Vec2::new(goal_x, 0.1);
        let blocked = segment_intersects_sphere(start, goal, obstacle);
        let length = path_length(start, goal, Some(obstacle))?;
        println!(
            "goal ({goal_x:.3}, 0.100)  straight {:.4}  shortest {:.4}  blocked {blocked}",
            start.distance(goal),
            length
        );
    }

    let goal = Vec2::new(0.125, 0.1);
    println!("\nwaypoints to the goal straight behind the obstacle:");
    for (k, w) in wrap_path_waypoints(start, goal, Some(obstacle), 5)?.iter().enumerate() {
        println!("  w{k}  ({:.4}, {:.4})  clearance {:.4}", w.x, w.y, obstacle.clearance(*w));
    }
    Ok(())
}
