pub mod interp;
pub mod kernel;
pub mod scaling;
pub mod subord;
pub mod volterra;
pub mod weights;

use crate::fail::Failure;

/// Assert helper for selftests: returns a `Check` failure naming the
/// violated condition.
pub fn st_check(ok: bool, name: &str, detail: String) -> Result<(), Failure> {
    if ok {
        println!("selftest {name}: ok");
        Ok(())
    } else {
        Err(Failure::Check(format!("selftest {name}: {detail}")))
    }
}

/// Close-to helper for selftests.
pub fn close(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}
