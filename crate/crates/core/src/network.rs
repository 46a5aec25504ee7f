//! Sensor-network topology and per-sensor measurement model.

use nalgebra::{DMatrix, DVector};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};

/// Weighted directed communication graph. Row `i` of the adjacency matrix
/// lists the weights on the nodes whose broadcasts node `i` consumes.
#[derive(Debug, Clone)]
pub struct Topology {
    adjacency: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
    include_self: bool,
}

impl Topology {
    pub fn new(adjacency: DMatrix<f64>, include_self: bool) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                got: adjacency.ncols(),
                context: "adjacency matrix must be square",
            });
        }
        if adjacency.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidParameter(
                "adjacency weights must be nonnegative".into(),
            ));
        }
        let mut neighbors = Vec::with_capacity(n);
        for i in 0..n {
            let mut list = Vec::new();
            for j in 0..n {
                if i == j && !include_self {
                    continue;
                }
                if adjacency[(i, j)] > 0.0 {
                    list.push(j);
                }
            }
            neighbors.push(list);
        }
        Ok(Self {
            adjacency,
            neighbors,
            include_self,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j && !self.include_self {
            return 0.0;
        }
        self.adjacency[(i, j)]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }
}

/// Measurement model of a single sensor: `y = H_k x + D_k v`.
#[derive(Debug, Clone)]
pub struct SensorParams {
    pub h: crate::system::MatrixSchedule,
    pub d: crate::system::MatrixSchedule,
    pub measurement_noise: Ellipsoid,
}

impl SensorParams {
    pub fn new(
        h: crate::system::MatrixSchedule,
        d: crate::system::MatrixSchedule,
        measurement_noise: Ellipsoid,
    ) -> Result<Self> {
        if h.nrows() != d.nrows() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: d.nrows(),
                context: "sensor H rows vs D rows",
            });
        }
        if d.ncols() != measurement_noise.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.ncols(),
                got: measurement_noise.dim(),
                context: "measurement noise ellipsoid vs D columns",
            });
        }
        Ok(Self {
            h,
            d,
            measurement_noise,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.measurement_noise.dim()
    }
}

/// Sensor output `H_k x + D_k v`, rejecting noise outside its ellipsoid.
pub fn measure(
    s: &SensorParams,
    k: usize,
    x_k: &DVector<f64>,
    v_k: &DVector<f64>,
) -> Result<DVector<f64>> {
    let q = s.measurement_noise.quadratic_form(v_k)?;
    let bound = s.measurement_noise.scale() * (1.0 + crate::ellipsoid::CONTAINS_SLACK);
    if q > bound {
        return Err(Error::NoiseOutOfBound { value: q, bound });
    }
    Ok(s.h.eval(k) * x_k + s.d.eval(k) * v_k)
}

/// Measured residual `y - H_k xhat`.
pub fn residual(
    s: &SensorParams,
    k: usize,
    y: &DVector<f64>,
    xhat: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y.len() != s.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.output_dim(),
            got: y.len(),
            context: "residual measurement",
        });
    }
    let h = s.h.eval(k);
    if xhat.len() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.ncols(),
            got: xhat.len(),
            context: "residual estimate",
        });
    }
    Ok(y - h * xhat)
}

/// Adjacency predicate on two collections of initial states: they may differ
/// by at most `varsigma` componentwise at node `i0` and must coincide exactly
/// everywhere else.
pub fn is_adjacent(
    x1: &[DVector<f64>],
    x2: &[DVector<f64>],
    i0: usize,
    varsigma: f64,
) -> bool {
    if x1.len() != x2.len() || i0 >= x1.len() || !(varsigma > 0.0) {
        return false;
    }
    for (i, (a, b)) in x1.iter().zip(x2.iter()).enumerate() {
        if a.len() != b.len() {
            return false;
        }
        if i == i0 {
            if a.iter().zip(b.iter()).any(|(p, q)| (p - q).abs() > varsigma) {
                return false;
            }
        } else if a != b {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::MatrixSchedule;
    use nalgebra::{dmatrix, dvector};

    fn ship_sensor(i: usize) -> SensorParams {
        SensorParams::new(
            MatrixSchedule::ShipH { index: i },
            MatrixSchedule::ShipD { index: i },
            Ellipsoid::origin(DMatrix::identity(1, 1) * 0.2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn topology_neighbors_match_adjacency() {
        let a = dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 2.0; 1.5, 0.0, 1.0];
        let t = Topology::new(a.clone(), false).unwrap();
        for i in 0..3 {
            let rebuilt: Vec<usize> =
                (0..3).filter(|&j| j != i && a[(i, j)] > 0.0).collect();
            assert_eq!(t.neighbors(i), rebuilt.as_slice());
        }
        // self-loop excluded by default
        assert_eq!(t.weight(2, 2), 0.0);
        let t_self = Topology::new(a, true).unwrap();
        assert_eq!(t_self.weight(2, 2), 1.0);
        assert!(t_self.neighbors(2).contains(&2));
    }

    #[test]
    fn topology_rejects_negative_weight() {
        assert!(Topology::new(dmatrix![0.0, -1.0; 0.0, 0.0], false).is_err());
    }

    #[test]
    fn measure_selector_row() {
        let s = SensorParams::new(
            MatrixSchedule::Constant(dmatrix![0.0, 1.0]),
            MatrixSchedule::Constant(dmatrix![0.0]),
            Ellipsoid::origin(DMatrix::identity(1, 1)).unwrap(),
        )
        .unwrap();
        let y = measure(&s, 0, &dvector![1.7, 3.7], &dvector![0.0]).unwrap();
        assert_eq!(y, dvector![3.7]);
    }

    #[test]
    fn measure_ship_sensor_oracle() {
        let s = ship_sensor(1);
        let y = measure(&s, 0, &dvector![1.7, 3.7], &dvector![0.0]).unwrap();
        assert!((y[0] - 1.32 * 3.7).abs() < 1e-12);
        assert!((y[0] - 4.884).abs() < 1e-12);
    }

    #[test]
    fn measure_linearity() {
        let s = ship_sensor(3);
        let x = dvector![0.2, -0.5];
        let d = dvector![1.1, 0.7];
        let v = dvector![0.1];
        let a = measure(&s, 4, &(&x + &d), &v).unwrap();
        let b = measure(&s, 4, &x, &v).unwrap();
        let h = s.h.eval(4);
        assert!((a - b - h * d).norm() < 1e-13);
    }

    #[test]
    fn measure_rejects_unbounded_noise() {
        let s = ship_sensor(1);
        let err = measure(&s, 0, &dvector![0.0, 0.0], &dvector![10.0]).unwrap_err();
        assert!(matches!(err, Error::NoiseOutOfBound { .. }));
    }

    #[test]
    fn residual_zero_on_perfect_prediction() {
        let s = ship_sensor(2);
        let x = dvector![1.0, 2.0];
        let y = measure(&s, 7, &x, &dvector![0.0]).unwrap();
        let r = residual(&s, 7, &y, &x).unwrap();
        assert!(r.norm() < 1e-13);
    }

    #[test]
    fn residual_scalar_arithmetic() {
        let s = SensorParams::new(
            MatrixSchedule::Constant(dmatrix![2.0]),
            MatrixSchedule::Constant(dmatrix![1.0]),
            Ellipsoid::origin(DMatrix::identity(1, 1)).unwrap(),
        )
        .unwrap();
        let r = residual(&s, 0, &dvector![5.0], &dvector![1.0]).unwrap();
        assert_eq!(r, dvector![3.0]);
    }

    #[test]
    fn adjacency_predicate() {
        let base = vec![dvector![1.0, 2.0], dvector![3.0, 4.0]];
        assert!(is_adjacent(&base, &base, 0, 0.5));
        let mut shifted = base.clone();
        shifted[1][0] += 0.5;
        assert!(is_adjacent(&base, &shifted, 1, 0.5));
        assert!(is_adjacent(&shifted, &base, 1, 0.5)); // symmetric
        assert!(!is_adjacent(&base, &shifted, 0, 0.5)); // wrong node
        let mut both = shifted.clone();
        both[0][1] += 0.1;
        assert!(!is_adjacent(&base, &both, 1, 0.5)); // differs at two nodes
    }
}
