use crate::Vec3;

/// The six permutations of three labels, identity first.
pub(crate) const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Local rank-3 laminate descriptor: three mutually orthogonal layer normals
/// `m[k]` and the relative thickness `t[k]` of the layer normal to `m[k]`.
///
/// Frames carry octahedral symmetry. Any signed permutation of the
/// `(m[k], t[k])` pairs describes the same microstructure, so no code here
/// assumes a consistent labeling between neighboring frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub m: [Vec3; 3],
    pub t: [f64; 3],
}

impl Frame {
    pub fn new(m: [Vec3; 3], t: [f64; 3]) -> Self {
        Self { m, t }
    }

    /// Axis-aligned frame with the given thicknesses.
    pub fn axes(t: [f64; 3]) -> Self {
        Self {
            m: [Vec3::x(), Vec3::y(), Vec3::z()],
            t,
        }
    }

    /// Largest violation of the unit-length and orthogonality constraints.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for k in 0..3 {
            err = err.max((self.m[k].norm() - 1.0).abs());
            for j in (k + 1)..3 {
                err = err.max(self.m[k].dot(&self.m[j]).abs());
            }
        }
        err
    }

    /// Signed frame vector best aligned with `d`, see [`closest_frame_vector`].
    pub fn closest_vector(&self, d: &Vec3) -> (usize, Vec3) {
        closest_frame_vector(self, d)
    }

    /// Relabel this frame by the signed permutation that best matches
    /// `reference`, so that `result.m[k]` points along `reference.m[k]`.
    ///
    /// The permutation maximizing `sum_k |reference.m[k] . m[pi(k)]|` is
    /// chosen; ties go to the earliest entry of [`PERMUTATIONS`].
    pub fn matched_to(&self, reference: &Frame) -> Frame {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (pi, perm) in PERMUTATIONS.iter().enumerate() {
            let score: f64 = (0..3)
                .map(|k| reference.m[k].dot(&self.m[perm[k]]).abs())
                .sum();
            if score > best_score {
                best_score = score;
                best = pi;
            }
        }
        let perm = PERMUTATIONS[best];
        let mut m = [Vec3::zeros(); 3];
        let mut t = [0.0; 3];
        for k in 0..3 {
            let v = self.m[perm[k]];
            m[k] = if reference.m[k].dot(&v) >= 0.0 { v } else { -v };
            t[k] = self.t[perm[k]];
        }
        Frame { m, t }
    }

    /// Apply a signed permutation: `result.m[k] = signs[k] * m[perm[k]]`.
    pub fn permuted(&self, perm: [usize; 3], signs: [f64; 3]) -> Frame {
        let mut m = [Vec3::zeros(); 3];
        let mut t = [0.0; 3];
        for k in 0..3 {
            m[k] = self.m[perm[k]] * signs[k];
            t[k] = self.t[perm[k]];
        }
        Frame { m, t }
    }

    /// Gram-Schmidt in the order m[0], m[1], m[2]. Returns `None` when the
    /// input vectors are (nearly) linearly dependent.
    pub fn orthonormalized(&self) -> Option<Frame> {
        let m0 = normalize(self.m[0])?;
        let m1 = normalize(self.m[1] - m0 * m0.dot(&self.m[1]))?;
        let m2 = normalize(self.m[2] - m0 * m0.dot(&self.m[2]) - m1 * m1.dot(&self.m[2]))?;
        Some(Frame {
            m: [m0, m1, m2],
            t: self.t,
        })
    }

    /// `true` when the three vectors form a right-handed basis.
    pub fn is_right_handed(&self) -> bool {
        self.m[0].cross(&self.m[1]).dot(&self.m[2]) > 0.0
    }
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    if n < 1e-12 {
        None
    } else {
        Some(v / n)
    }
}

/// Find the signed frame vector `s * m[k]` maximizing `s * (m[k] . d)`.
///
/// Returns the zero-based layer index `k` and the signed unit vector. Ties are
/// broken towards the lowest index; a zero dot product keeps the positive sign.
pub fn closest_frame_vector(frame: &Frame, d: &Vec3) -> (usize, Vec3) {
    let mut best_k = 0;
    let mut best_abs = f64::NEG_INFINITY;
    let mut best_dot = 0.0;
    for k in 0..3 {
        let dot = frame.m[k].dot(d);
        if dot.abs() > best_abs {
            best_abs = dot.abs();
            best_k = k;
            best_dot = dot;
        }
    }
    let v = if best_dot >= 0.0 {
        frame.m[best_k]
    } else {
        -frame.m[best_k]
    };
    (best_k, v)
}

/// Angle in radians of the smallest rotation taking frame `a` onto frame `b`
/// modulo the octahedral group.
///
/// All 48 signed permutations of `b` are tried; only those with the same
/// handedness as `a` give a proper rotation. The best one maximizes the trace
/// of the relative rotation `R = sum_k b'_k a_k^T`.
pub fn relative_rotation_angle(a: &Frame, b: &Frame) -> f64 {
    let hand_a = a.m[0].cross(&a.m[1]).dot(&a.m[2]).signum();
    let mut best_trace = f64::NEG_INFINITY;
    for perm in PERMUTATIONS.iter() {
        for sign_bits in 0..8u8 {
            let s = [
                if sign_bits & 1 == 0 { 1.0 } else { -1.0 },
                if sign_bits & 2 == 0 { 1.0 } else { -1.0 },
                if sign_bits & 4 == 0 { 1.0 } else { -1.0 },
            ];
            let b0 = b.m[perm[0]] * s[0];
            let b1 = b.m[perm[1]] * s[1];
            let b2 = b.m[perm[2]] * s[2];
            if b0.cross(&b1).dot(&b2).signum() != hand_a {
                continue;
            }
            // trace(sum_k b'_k a_k^T) = sum_k b'_k . a_k
            let trace = b0.dot(&a.m[0]) + b1.dot(&a.m[1]) + b2.dot(&a.m[2]);
            if trace > best_trace {
                best_trace = trace;
            }
        }
    }
    ((best_trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn rotz(deg: f64) -> Frame {
        let (s, c) = deg.to_radians().sin_cos();
        Frame::new(
            [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::z()],
            [0.5; 3],
        )
    }

    #[test]
    fn closest_vector_axis_dominance() {
        let f = Frame::axes([0.5; 3]);
        assert_eq!(
            closest_frame_vector(&f, &Vec3::new(0.9, 0.1, 0.0)),
            (0, Vec3::x())
        );
        assert_eq!(
            closest_frame_vector(&f, &Vec3::new(-1.0, 0.0, 0.0)),
            (0, -Vec3::x())
        );
    }

    #[test]
    fn closest_vector_tie_goes_to_lowest_index() {
        let a = FRAC_1_SQRT_2;
        let f = Frame::new(
            [Vec3::new(a, a, 0.0), Vec3::new(-a, a, 0.0), Vec3::z()],
            [0.5; 3],
        );
        // oracle: enumerate all six signed vectors, keep the first maximum
        let d = Vec3::x();
        let mut best = (usize::MAX, Vec3::zeros(), f64::NEG_INFINITY);
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let dot = s * f.m[k].dot(&d);
                if dot > best.2 {
                    best = (k, f.m[k] * s, dot);
                }
            }
        }
        let (k, v) = closest_frame_vector(&f, &d);
        assert_eq!((k, v), (best.0, best.1));
        assert_eq!(v, Vec3::new(a, a, 0.0));
    }

    #[test]
    fn matched_to_recovers_permutation() {
        let f = rotz(10.0);
        let scrambled = f.permuted([2, 0, 1], [-1.0, 1.0, -1.0]);
        let back = scrambled.matched_to(&f);
        for k in 0..3 {
            assert!((back.m[k] - f.m[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn rotation_angle_between_rotated_frames() {
        let a = rotz(0.0);
        let b = rotz(10.0);
        assert!((relative_rotation_angle(&a, &b) - 10f64.to_radians()).abs() < 1e-12);
        // 80 degrees is 10 degrees away modulo the octahedral group
        let c = rotz(80.0);
        assert!((relative_rotation_angle(&a, &c) - 10f64.to_radians()).abs() < 1e-12);
        let scrambled = b.permuted([1, 2, 0], [1.0, -1.0, 1.0]);
        assert!((relative_rotation_angle(&a, &scrambled) - 10f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_produces_orthonormal_frame() {
        let f = Frame::new(
            [
                Vec3::new(1.0, 0.1, 0.0),
                Vec3::new(0.2, 1.0, 0.1),
                Vec3::new(0.0, 0.3, 2.0),
            ],
            [0.1, 0.2, 0.3],
        );
        let g = f.orthonormalized().unwrap();
        assert!(g.orthonormality_error() < 1e-12);
        assert!(g.is_right_handed());
    }
}
