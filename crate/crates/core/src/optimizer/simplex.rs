//! Box-constrained Nelder–Mead in two dimensions.
//!
//! Trial points are projected onto the box before evaluation, so the
//! objective is never called outside it. Non-finite objective values are
//! treated as `+∞` and simply lose every comparison.

use crate::real::{lit, Real};

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions<T> {
    pub lower: [T; 2],
    pub upper: [T; 2],
    /// Edge length of the initial simplex.
    pub initial_step: T,
    /// Stop once every vertex is within this distance of the best vertex.
    pub diameter_tol: T,
    pub max_iterations: usize,
}

impl<T: Real> SimplexOptions<T> {
    pub fn new(lower: [T; 2], upper: [T; 2]) -> Self {
        Self {
            lower,
            upper,
            initial_step: lit(0.1),
            diameter_tol: lit(1e-6),
            max_iterations: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexResult<T> {
    pub point: [T; 2],
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Vertex<T> {
    x: [T; 2],
    f: T,
}

fn clean<T: Real>(f: T) -> T {
    if f.is_nan() {
        T::infinity()
    } else {
        f
    }
}

/// Minimizes `objective` starting from `start`.
pub fn minimize<T, F>(mut objective: F, start: [T; 2], opts: &SimplexOptions<T>) -> SimplexResult<T>
where
    T: Real,
    F: FnMut([T; 2]) -> T,
{
    let project = |x: [T; 2]| -> [T; 2] {
        [
            x[0].max(opts.lower[0]).min(opts.upper[0]),
            x[1].max(opts.lower[1]).min(opts.upper[1]),
        ]
    };
    let mut evaluations = 0usize;
    let mut eval = |x: [T; 2]| {
        evaluations += 1;
        clean(objective(x))
    };

    let x0 = project(start);
    let mut simplex = Vec::with_capacity(3);
    simplex.push(Vertex { x: x0, f: eval(x0) });
    for axis in 0..2 {
        let mut x = x0;
        // step inward when the start sits on the upper face
        let step = if x[axis] + opts.initial_step > opts.upper[axis] {
            -opts.initial_step
        } else {
            opts.initial_step
        };
        x[axis] = x[axis] + step;
        let x = project(x);
        simplex.push(Vertex { x, f: eval(x) });
    }

    let (reflect, expand, contract, shrink) = (T::one(), lit::<T>(2.0), lit::<T>(0.5), lit::<T>(0.5));
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| {
            a.f.partial_cmp(&b.f)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.x[0].partial_cmp(&b.x[0]).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.x[1].partial_cmp(&b.x[1]).unwrap_or(std::cmp::Ordering::Equal))
        });
        let best = simplex[0].x;
        let diameter = simplex[1..]
            .iter()
            .map(|v| (v.x[0] - best[0]).hypot(v.x[1] - best[1]))
            .fold(T::zero(), T::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid = [
            (simplex[0].x[0] + simplex[1].x[0]) / lit(2.0),
            (simplex[0].x[1] + simplex[1].x[1]) / lit(2.0),
        ];
        let worst = simplex[2].x;
        let along = |t: T| {
            project([
                centroid[0] + t * (centroid[0] - worst[0]),
                centroid[1] + t * (centroid[1] - worst[1]),
            ])
        };

        let xr = along(reflect);
        let fr = eval(xr);
        if fr < simplex[0].f {
            let xe = along(expand);
            let fe = eval(xe);
            simplex[2] = if fe < fr {
                Vertex { x: xe, f: fe }
            } else {
                Vertex { x: xr, f: fr }
            };
            continue;
        }
        if fr < simplex[1].f {
            simplex[2] = Vertex { x: xr, f: fr };
            continue;
        }
        let (xc, fc) = if fr < simplex[2].f {
            let xc = along(contract);
            (xc, eval(xc))
        } else {
            let xc = along(-contract);
            (xc, eval(xc))
        };
        if fc < simplex[2].f.min(fr) {
            simplex[2] = Vertex { x: xc, f: fc };
            continue;
        }
        for v in simplex.iter_mut().skip(1) {
            let x = project([
                best[0] + shrink * (v.x[0] - best[0]),
                best[1] + shrink * (v.x[1] - best[1]),
            ]);
            *v = Vertex { x, f: eval(x) };
        }
    }
    simplex.sort_by(|a, b| a.f.partial_cmp(&b.f).unwrap_or(std::cmp::Ordering::Equal));
    SimplexResult {
        point: simplex[0].x,
        value: simplex[0].f,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum_of_quadratic() {
        let opts = SimplexOptions::new([0.0, 0.0], [2.0, 2.0]);
        let res = minimize(
            |x: [f64; 2]| (x[0] - 0.7).powi(2) + 3.0 * (x[1] - 1.4).powi(2),
            [1.0, 1.0],
            &opts,
        );
        assert!(res.converged);
        assert!((res.point[0] - 0.7).abs() < 1e-5);
        assert!((res.point[1] - 1.4).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_valley() {
        let mut opts = SimplexOptions::new([-2.0, -2.0], [2.0, 2.0]);
        opts.diameter_tol = 1e-9;
        let res = minimize(
            |x: [f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            [-1.2, 1.0],
            &opts,
        );
        assert!((res.point[0] - 1.0).abs() < 1e-4, "{:?}", res);
        assert!((res.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn minimum_outside_box_lands_on_face() {
        let opts = SimplexOptions::new([0.0, 0.0], [2.0, 2.0]);
        let res = minimize(
            |x: [f64; 2]| (x[0] - 3.0).powi(2) + (x[1] - 1.0).powi(2),
            [1.0, 1.0],
            &opts,
        );
        assert!((res.point[0] - 2.0).abs() < 1e-6);
        assert!((res.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn never_worse_than_start() {
        let opts = SimplexOptions::new([0.0, 0.0], [2.0, 2.0]);
        let f = |x: [f64; 2]| if x[0] > 1.05 { f64::NAN } else { -(x[0] * x[1]).sin() };
        let start = [1.0, 1.0];
        let res = minimize(f, start, &opts);
        assert!(res.value <= f(start));
        assert!(res.point[0] <= 1.05);
    }
}
