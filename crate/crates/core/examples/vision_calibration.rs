//! Fit a pixel-to-robot homography from four marker correspondences, then
//! describe the simulated scene with it.
//!
//! cargo run -p interplan --example vision_calibration

use interplan::guidelines::TaskFamily;
use interplan::vision::{fit_homography, refresh_scene, Calibration, Correspondence};
use interplan::world::{Point, WorldState};

fn main() {
    let truth = Calibration::builtin();
    let markers = [(80.0, 60.0), (560.0, 70.0), (600.0, 420.0), (50.0, 400.0), (320.0, 240.0)];
    let pairs: Vec<Correspondence> = markers
        .iter()
        .map(|&(u, v)| {
            let pixel = Point::new(u, v);
            Correspondence {
                pixel,
                robot: truth.pixel_to_robot(pixel),
            }
        })
        .collect();

    let fit = fit_homography(&pairs).expect("fit");
    println!("H =\n{:.6}", fit.h);
    println!("max reprojection error: {:.2e} px", fit.max_reprojection_error);

    let cal = Calibration::new(fit.h, (640, 480)).expect("calibration");
    let probe = Point::new(320.0, 240.0);
    let robot = cal.pixel_to_robot(probe);
    println!("pixel ({}, {}) -> robot ({:.4}, {:.4}) m", probe.x, probe.y, robot.x, robot.y);

    let world = WorldState::reset(TaskFamily::Drink, 0);
    println!("{}", refresh_scene(&world, &cal).rendered);
}
