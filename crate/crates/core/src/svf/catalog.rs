//! Built-in set-valued functions on `[0, 1]`.

use std::f64::consts::PI;

use super::{Interval, SetValuedFunction};
use crate::error::{Error, Result};
use crate::sets::{CompactSet, Point};

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "lipschitz-tube",
    "jump-pair",
    "annulus-slice",
    "const-c",
    "branch-pair",
    "singleton-jump",
];

/// Fiber size used by the sampled catalog entries unless overridden.
pub const DEFAULT_FIBER_POINTS: usize = 5;

/// Value of the constant in `const-c`.
pub const CONST_C: f64 = 0.75;

pub fn by_name(name: &str, fiber_points: usize) -> Result<SetValuedFunction> {
    match name {
        "lipschitz-tube" => lipschitz_tube(fiber_points),
        "jump-pair" => Ok(jump_pair()),
        "annulus-slice" => annulus_slice(fiber_points),
        "const-c" => Ok(constant(CONST_C)),
        "branch-pair" => Ok(branch_pair()),
        "singleton-jump" => Ok(singleton_jump()),
        other => Err(Error::UnknownCatalog(other.to_string())),
    }
}

/// `{0}` on `[0, ½)` and `{−1, 1}` on `[½, 1]`, stored on the grid `{0, ½}`.
pub fn jump_pair() -> SetValuedFunction {
    SetValuedFunction::grid(
        "jump-pair",
        Interval::unit(),
        vec![0.0, 0.5],
        vec![
            CompactSet::from_scalars(&[0.0]).unwrap(),
            CompactSet::from_scalars(&[-1.0, 1.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// `{0}` on `[0, ½)` and `{2}` on `[½, 1]`.
pub fn singleton_jump() -> SetValuedFunction {
    SetValuedFunction::grid(
        "singleton-jump",
        Interval::unit(),
        vec![0.0, 0.5],
        vec![
            CompactSet::from_scalars(&[0.0]).unwrap(),
            CompactSet::from_scalars(&[2.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// `m` equally spaced points of `[−(1 + x²), 1 + x²]`.
pub fn lipschitz_tube(m: usize) -> Result<SetValuedFunction> {
    if m < 2 {
        return Err(Error::InvalidArgument("lipschitz-tube needs m ≥ 2".into()));
    }
    Ok(SetValuedFunction::closed_form(
        "lipschitz-tube",
        Interval::unit(),
        move |x| {
            let r = 1.0 + x * x;
            let pts: Vec<f64> = (0..m)
                .map(|j| r * (-1.0 + 2.0 * j as f64 / (m - 1) as f64))
                .collect();
            CompactSet::from_scalars(&pts).unwrap()
        },
    ))
}

/// Points on two arcs of radii `1` and `1.5 + x/2`, spanning three quarters
/// of a turn that rotates with `x`. Planar, nonconvex fibers.
pub fn annulus_slice(m: usize) -> Result<SetValuedFunction> {
    if m < 2 {
        return Err(Error::InvalidArgument("annulus-slice needs m ≥ 2".into()));
    }
    Ok(SetValuedFunction::closed_form(
        "annulus-slice",
        Interval::unit(),
        move |x| {
            let radii = [1.0, 1.5 + 0.5 * x];
            let mut pts = Vec::with_capacity(2 * m);
            for r in radii {
                for j in 0..m {
                    let th = 0.25 * PI * x + 1.5 * PI * j as f64 / (m - 1) as f64;
                    pts.push(Point::new(vec![r * th.cos(), r * th.sin()]).unwrap());
                }
            }
            CompactSet::new(pts).unwrap()
        },
    ))
}

pub fn constant(c: f64) -> SetValuedFunction {
    SetValuedFunction::grid(
        "const-c",
        Interval::unit(),
        vec![0.0],
        vec![CompactSet::from_scalars(&[c]).unwrap()],
    )
    .unwrap()
}

/// `{x, −x}`.
pub fn branch_pair() -> SetValuedFunction {
    SetValuedFunction::closed_form("branch-pair", Interval::unit(), |x| {
        CompactSet::from_scalars(&[x, -x]).unwrap()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            let f = by_name(name, DEFAULT_FIBER_POINTS).unwrap();
            assert_eq!(f.name(), *name);
        }
        assert!(matches!(
            by_name("jump-pear", 5),
            Err(Error::UnknownCatalog(_))
        ));
    }

    #[test]
    fn fibers_have_expected_shape() {
        let tube = lipschitz_tube(5).unwrap();
        assert_eq!(tube.eval(1.0).scalars().unwrap(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let ann = annulus_slice(4).unwrap();
        assert_eq!(ann.dim(), 2);
        assert_eq!(ann.eval(0.3).len(), 8);
        assert_eq!(branch_pair().eval(0.0).len(), 1);
        assert_eq!(jump_pair().eval(0.5).len(), 2);
        assert_eq!(constant(0.75).eval(0.9).scalars().unwrap(), vec![0.75]);
    }
}
