use rand::Rng;

use super::{MobilityConfig, UeState};

/// Advance a phone by one time step of the random walk.
///
/// When `redirect_due` is set the heading is redrawn uniformly in `[0, 2pi)`
/// before moving; the scenario loop raises it every `redirect_interval_s`.
/// Boundary crossings reflect specularly and flip the heading component
/// accordingly, so the returned position is always inside the boundary.
pub fn step_ue<R: Rng>(
    ue: &UeState,
    dt_s: f64,
    mobility: &MobilityConfig,
    redirect_due: bool,
    rng: &mut R,
) -> UeState {
    let mut heading = ue.heading;
    if redirect_due {
        heading = rng.gen_range(0.0..std::f64::consts::TAU);
    }

    let step = mobility.speed_mps * dt_s;
    let (x, flip_x) = reflect(
        ue.position.x + step * heading.cos(),
        mobility.boundary.min_x,
        mobility.boundary.max_x,
    );
    let (y, flip_y) = reflect(
        ue.position.y + step * heading.sin(),
        mobility.boundary.min_y,
        mobility.boundary.max_y,
    );

    if flip_x || flip_y {
        let vx = heading.cos() * if flip_x { -1.0 } else { 1.0 };
        let vy = heading.sin() * if flip_y { -1.0 } else { 1.0 };
        heading = vy.atan2(vx);
    }

    UeState {
        position: super::Position::new(x, y),
        heading,
        ..*ue
    }
}

/// Fold a coordinate back into `[lo, hi]` by repeated specular reflection.
/// Returns the folded value and whether an odd number of reflections
/// happened (meaning the velocity component changed sign).
fn reflect(mut v: f64, lo: f64, hi: f64) -> (f64, bool) {
    debug_assert!(hi > lo);
    let mut flipped = false;
    // A step can cross the boundary more than once only if it is longer than
    // the boundary itself; the loop handles that case too.
    while v < lo || v > hi {
        if v < lo {
            v = 2.0 * lo - v;
        } else {
            v = 2.0 * hi - v;
        }
        flipped = !flipped;
    }
    (v, flipped)
}
