//! Dense complex-matrix quantum core for registers of one to three qubits.
//!
//! Qubit `q0` is always the most significant bit of a basis index, so the
//! ket `|q0 q1 q2>` sits at row `4*q0 + 2*q1 + q2`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for algebraic identities.
pub const TOL: f64 = 1e-12;
/// Tolerance for channel completeness and positivity checks.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Probability below which a post-selection branch is treated as empty.
pub const VANISHING_PROBABILITY: f64 = 1e-14;
/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 3;
const MAX_DIM: usize = 1 << MAX_QUBITS;

pub type C64 = Complex64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Number of qubits for a power-of-two dimension.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.data[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            data: DMatrix::from_row_slice(rows, cols, entries),
        })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let entries: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
        Self::from_rows(rows, cols, &entries)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[(i, i)] = re(v);
        }
        m
    }

    /// `|i><j|` in a space of dimension `dim`.
    pub fn ket_bra(i: usize, j: usize, dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m.data[(i, j)] = re(1.0);
        m
    }

    /// Projector onto computational basis state `index`.
    pub fn basis_projector(index: usize, dim: usize) -> Self {
        Self::ket_bra(index, index, dim)
    }

    pub fn from_nalgebra(data: DMatrix<C64>) -> Self {
        Self { data }
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[(row, col)] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            data: &self.data * re(factor),
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    /// Largest absolute entry-wise difference. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows(), self.cols()),
            (other.rows(), other.cols()),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows() == other.rows()
            && self.cols() == other.cols()
            && self.max_abs_diff(other) <= tol
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut values: Vec<f64> = SymmetricEigen::new(h.data).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    fn hermitian_part(&self) -> Self {
        Self {
            data: (&self.data + self.data.adjoint()) * re(0.5),
        }
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    /// Rejects operators that are not Hermitian or have eigenvalues below `-tol`.
    pub fn check_positive(&self, tol: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Dimension("positivity needs a square matrix".into()));
        }
        let deviation = self.hermitian_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        let min_eigenvalue = self.min_eigenvalue();
        if min_eigenvalue < -tol {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(())
    }

    /// Applies `f` to the eigenvalues of the Hermitian part.
    fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Self {
        let eig = SymmetricEigen::new(self.hermitian_part().data);
        let mapped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| re(f(v))));
        let v = eig.eigenvectors;
        Self {
            data: &v * mapped * v.adjoint(),
        }
    }

    /// Principal square root of a positive operator.
    pub fn psd_sqrt(&self) -> Self {
        self.hermitian_map(|v| v.max(0.0).sqrt())
    }

    /// Kronecker product. See [`tensor`].
    pub fn kron(&self, other: &Self) -> Result<Self> {
        tensor(self, other)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data * &rhs.data,
        }
    }
}

/// Kronecker product `a ⊗ b` with `a` on the more significant qubits.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::RegisterTooLarge {
            qubits: qubits_for_dim(rows.max(cols)).unwrap_or(usize::MAX),
        });
    }
    Ok(ComplexMatrix {
        data: a.data.kronecker(&b.data),
    })
}

/// Tensor product of a non-empty list of factors, left to right.
pub fn tensor_all(factors: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::Dimension("empty tensor product".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| tensor(&acc, f))
}

fn bit(index: usize, n_qubits: usize, qubit: usize) -> usize {
    (index >> (n_qubits - 1 - qubit)) & 1
}

/// Index into the subsystem formed by `qubits` (in the listed order).
fn sub_index(index: usize, n_qubits: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .fold(0, |acc, &q| (acc << 1) | bit(index, n_qubits, q))
}

/// True when `i` and `j` agree on every qubit not in `qubits`.
fn agree_outside(i: usize, j: usize, n_qubits: usize, qubits: &[usize]) -> bool {
    (0..n_qubits)
        .filter(|q| !qubits.contains(q))
        .all(|q| bit(i, n_qubits, q) == bit(j, n_qubits, q))
}

fn check_qubit_list(qubits: &[usize], n_qubits: usize) -> Result<()> {
    if qubits.is_empty() {
        return Err(Error::QubitSelection("empty qubit list".into()));
    }
    for (k, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitSelection(format!(
                "qubit {q} outside a {n_qubits}-qubit register"
            )));
        }
        if qubits[..k].contains(&q) {
            return Err(Error::QubitSelection(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Lifts `op`, acting on `qubits` (in that order), to the full `n_qubits`
/// register by tensoring identities on the remaining qubits.
pub fn embed(op: &ComplexMatrix, qubits: &[usize], n_qubits: usize) -> Result<ComplexMatrix> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::RegisterTooLarge { qubits: n_qubits });
    }
    check_qubit_list(qubits, n_qubits)?;
    let sub_dim = 1 << qubits.len();
    if op.rows() != sub_dim || op.cols() != sub_dim {
        return Err(Error::Dimension(format!(
            "{}x{} operator on {} qubits",
            op.rows(),
            op.cols(),
            qubits.len()
        )));
    }
    let dim = 1 << n_qubits;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if agree_outside(i, j, n_qubits, qubits) {
                let v = op.get(
                    sub_index(i, n_qubits, qubits),
                    sub_index(j, n_qubits, qubits),
                );
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

/// A normalized state vector of one to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len()).ok_or(Error::NotPowerOfTwo {
            what: "state vector",
            dim: amplitudes.len(),
        })?;
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge { qubits: n });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::NotNormalized { value: norm });
        }
        Ok(Self { amplitudes })
    }

    /// Single-qubit state `alpha|0> + beta|1>`.
    pub fn qubit(alpha: C64, beta: C64) -> Result<Self> {
        Self::new(vec![alpha, beta])
    }

    /// Computational basis state `|index>` on `n_qubits`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Dimension(format!(
                "basis index {index} for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![re(0.0); dim];
        amps[index] = re(1.0);
        Self::new(amps)
    }

    pub fn zero() -> Self {
        Self {
            amplitudes: vec![re(1.0), re(0.0)],
        }
    }

    pub fn one() -> Self {
        Self {
            amplitudes: vec![re(0.0), re(1.0)],
        }
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: vec![re(h), re(h)],
        }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: vec![re(h), re(-h)],
        }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n_qubits() + other.n_qubits();
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge { qubits: n });
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(Self { amplitudes })
    }

    /// `|psi><psi|` as a matrix.
    pub fn projector(&self) -> ComplexMatrix {
        let dim = self.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, self.amplitudes[i] * self.amplitudes[j].conj());
            }
        }
        m
    }

    /// `<psi| M |psi>`.
    pub fn expectation(&self, m: &ComplexMatrix) -> C64 {
        let dim = self.dim();
        let mut acc = re(0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += self.amplitudes[i].conj() * m.get(i, j) * self.amplitudes[j];
            }
        }
        acc
    }
}

/// A Hermitian, positive semidefinite state on one to three qubits.
///
/// Normalized states have unit trace. Sub-normalized states only arise
/// inside post-selection pipelines and carry `normalized == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    n_qubits: usize,
    normalized: bool,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self::unnormalized(matrix)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > TOL {
            return Err(Error::NotNormalized { value: tr });
        }
        Ok(Self {
            normalized: true,
            ..rho
        })
    }

    /// Validates Hermiticity and positivity but allows any trace in `[0, 1]`.
    pub fn unnormalized(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let n_qubits = qubits_for_dim(matrix.rows()).ok_or(Error::NotPowerOfTwo {
            what: "density matrix",
            dim: matrix.rows(),
        })?;
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge { qubits: n_qubits });
        }
        let deviation = matrix.hermitian_deviation();
        if deviation > TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let min_eigenvalue = matrix.min_eigenvalue();
        if min_eigenvalue < -CHANNEL_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        let tr = matrix.trace().re;
        if tr > 1.0 + TOL {
            return Err(Error::NotNormalized { value: tr });
        }
        let normalized = (tr - 1.0).abs() <= TOL;
        Ok(Self {
            matrix,
            n_qubits,
            normalized,
        })
    }

    pub fn from_pure(state: &PureState) -> Self {
        Self {
            matrix: state.projector(),
            n_qubits: state.n_qubits(),
            normalized: true,
        }
    }

    /// `|index><index|` on `n_qubits`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Ok(Self::from_pure(&PureState::basis(n_qubits, index)?))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::RegisterTooLarge { qubits: n_qubits });
        }
        let dim = 1 << n_qubits;
        Ok(Self {
            matrix: ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
            n_qubits,
            normalized: true,
        })
    }

    /// Builds a state from a matrix produced by trusted in-crate maps
    /// (channels, projections) without re-running the eigensolve.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        let n_qubits = qubits_for_dim(matrix.rows()).expect("power-of-two dimension");
        let normalized = (matrix.trace().re - 1.0).abs() <= CHANNEL_TOL;
        Self {
            matrix,
            n_qubits,
            normalized,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Diagonal entries (basis-state populations).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix.get(i, i).re).collect()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let matrix = tensor(&self.matrix, &other.matrix)?;
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            normalized: self.normalized && other.normalized,
            matrix,
        })
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        if op.rows() != self.dim() || op.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "{}x{} operator on a {}-dimensional state",
                op.rows(),
                op.cols(),
                self.dim()
            )));
        }
        Ok((op * &self.matrix).trace())
    }

    /// `<psi|ρ|psi>` for a pure reference state of the same size.
    pub fn fidelity_with(&self, state: &PureState) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::Dimension("fidelity between different registers".into()));
        }
        Ok(state.expectation(&self.matrix).re)
    }

    /// Divides by the trace and clamps eigenvalues in `(-1e-10, 0)` to zero.
    pub fn renormalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr < VANISHING_PROBABILITY {
            return Err(Error::NotNormalized { value: tr });
        }
        let mut matrix = self.matrix.scale(1.0 / tr);
        if matrix.min_eigenvalue() < 0.0 {
            matrix = matrix.hermitian_map(|v| v.max(0.0));
            let t = matrix.trace().re;
            matrix = matrix.scale(1.0 / t);
        }
        Ok(Self {
            matrix,
            n_qubits: self.n_qubits,
            normalized: true,
        })
    }

    /// Applies a unitary acting on `qubits`.
    pub fn apply_unitary(&self, unitary: &ComplexMatrix, qubits: &[usize]) -> Result<Self> {
        let u = embed(unitary, qubits, self.n_qubits)?;
        Ok(Self {
            matrix: &(&u * &self.matrix) * &u.adjoint(),
            ..self.clone()
        })
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.matrix.approx_eq(&other.matrix, tol)
    }
}

/// A completeness-satisfying set of Kraus operators on an ordered qubit list.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    acts_on: Vec<usize>,
}

impl KrausChannel {
    /// Validates shapes and `Σ A†A = I` within [`CHANNEL_TOL`]. The channel
    /// acts on qubits `0..k` until relocated with [`KrausChannel::on`].
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::Invalid("channel needs at least one operator".into()))?;
        let dim = first.rows();
        let k = qubits_for_dim(dim).ok_or(Error::NotPowerOfTwo {
            what: "Kraus operator",
            dim,
        })?;
        if k == 0 || k > MAX_QUBITS {
            return Err(Error::RegisterTooLarge { qubits: k });
        }
        if operators.iter().any(|a| a.rows() != dim || a.cols() != dim) {
            return Err(Error::Dimension(
                "Kraus operators must be square and share one dimension".into(),
            ));
        }
        let deviation = completeness_deviation(&operators);
        if deviation > CHANNEL_TOL {
            return Err(Error::Completeness { deviation });
        }
        Ok(Self {
            operators,
            acts_on: (0..k).collect(),
        })
    }

    /// Single-operator channel for a unitary.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Moves the channel onto `qubits` (same count, listed in operator order).
    pub fn on(mut self, qubits: &[usize]) -> Result<Self> {
        if qubits.len() != self.acts_on.len() {
            return Err(Error::QubitSelection(format!(
                "{}-qubit channel placed on {} qubits",
                self.acts_on.len(),
                qubits.len()
            )));
        }
        check_qubit_list(qubits, MAX_QUBITS)?;
        self.acts_on = qubits.to_vec();
        Ok(self)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn acts_on(&self) -> &[usize] {
        &self.acts_on
    }

    pub fn completeness_deviation(&self) -> f64 {
        completeness_deviation(&self.operators)
    }

    /// Operators lifted to an `n_qubits` register.
    pub fn lifted(&self, n_qubits: usize) -> Result<Vec<ComplexMatrix>> {
        self.operators
            .iter()
            .map(|a| embed(a, &self.acts_on, n_qubits))
            .collect()
    }

    /// Sequential composition: `self` first, then `next`. Both must act on
    /// the same qubit list.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if self.acts_on != next.acts_on {
            return Err(Error::QubitSelection(
                "composed channels act on different qubits".into(),
            ));
        }
        let operators = next
            .operators
            .iter()
            .flat_map(|b| self.operators.iter().map(move |a| b * a))
            .collect();
        Ok(Self::new(operators)?.on_unchecked(self.acts_on.clone()))
    }

    fn on_unchecked(mut self, acts_on: Vec<usize>) -> Self {
        self.acts_on = acts_on;
        self
    }
}

fn completeness_deviation(operators: &[ComplexMatrix]) -> f64 {
    let dim = operators[0].rows();
    let sum = operators
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, a| &acc + &(&a.adjoint() * a));
    sum.max_abs_diff(&ComplexMatrix::identity(dim))
}

/// `Σ_i A_i ρ A_i†` with the channel lifted to the register of `rho`.
///
/// Sub-normalized inputs stay sub-normalized; the map is linear.
pub fn apply_channel(rho: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix> {
    let deviation = channel.completeness_deviation();
    if deviation > CHANNEL_TOL {
        return Err(Error::Completeness { deviation });
    }
    let n = rho.n_qubits();
    if channel.acts_on().iter().any(|&q| q >= n) {
        return Err(Error::QubitSelection(format!(
            "channel on {:?} applied to a {n}-qubit register",
            channel.acts_on()
        )));
    }
    let dim = rho.dim();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for a in channel.lifted(n)? {
        out = &out + &(&(&a * rho.matrix()) * &a.adjoint());
    }
    Ok(DensityMatrix {
        matrix: out,
        n_qubits: n,
        normalized: rho.normalized,
    })
}

/// Reduced state on `keep`, ordered by ascending qubit index.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(Error::QubitSelection("cannot keep zero qubits".into()));
    }
    if keep.len() >= n {
        return Err(Error::QubitSelection(
            "keep-set must be a strict subset of the register".into(),
        ));
    }
    check_qubit_list(&keep, n)?;
    let sub = 1 << keep.len();
    let dim = rho.dim();
    let mut out = ComplexMatrix::zeros(sub, sub);
    for i in 0..dim {
        for j in 0..dim {
            if agree_outside(i, j, n, &keep) {
                let (si, sj) = (sub_index(i, n, &keep), sub_index(j, n, &keep));
                out.set(si, sj, out.get(si, sj) + rho.matrix().get(i, j));
            }
        }
    }
    Ok(DensityMatrix {
        matrix: out,
        n_qubits: keep.len(),
        normalized: rho.normalized,
    })
}

/// A POVM: positive effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    effects: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl MeasurementSet {
    pub fn new(effects: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if effects.is_empty() || effects.len() != labels.len() {
            return Err(Error::Invalid(
                "measurement needs one label per effect".into(),
            ));
        }
        let dim = effects[0].rows();
        if effects.iter().any(|e| e.rows() != dim || e.cols() != dim) {
            return Err(Error::Dimension("effects must share one square shape".into()));
        }
        for e in &effects {
            e.check_positive(CHANNEL_TOL)?;
        }
        let sum = effects
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, e| &acc + e);
        let deviation = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if deviation > CHANNEL_TOL {
            return Err(Error::IncompleteMeasurement { deviation });
        }
        Ok(Self { effects, labels })
    }

    /// Projective measurement in the computational basis of `n_qubits`,
    /// labelled by bit strings.
    pub fn computational(n_qubits: usize) -> Result<Self> {
        let dim = 1 << n_qubits;
        let effects = (0..dim)
            .map(|i| ComplexMatrix::basis_projector(i, dim))
            .collect();
        let labels = (0..dim)
            .map(|i| format!("{i:0width$b}", width = n_qubits))
            .collect();
        Self::new(effects, labels)
    }

    /// The joint measurement `self ⊗ other` with labels concatenated.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut effects = Vec::new();
        let mut labels = Vec::new();
        for (ea, la) in self.effects.iter().zip(&self.labels) {
            for (eb, lb) in other.effects.iter().zip(&other.labels) {
                effects.push(tensor(ea, eb)?);
                labels.push(format!("{la}{lb}"));
            }
        }
        Self::new(effects, labels)
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effect(&self, label: &str) -> Option<&ComplexMatrix> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.effects[i])
    }
}

/// Outcome probabilities in effect order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    entries: Vec<(String, f64)>,
}

impl OutcomeDistribution {
    pub fn probability(&self, label: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|&(_, p)| p)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// `{label -> Tr(E ρ)}` for every effect.
pub fn measure(rho: &DensityMatrix, m: &MeasurementSet) -> Result<OutcomeDistribution> {
    let entries = m
        .effects
        .iter()
        .zip(&m.labels)
        .map(|(e, l)| Ok((l.clone(), rho.expectation(e)?.re)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeDistribution { entries })
}

/// Result of conditioning on a measurement effect.
#[derive(Debug, Clone, PartialEq)]
pub enum PostSelection {
    Kept {
        state: DensityMatrix,
        probability: f64,
    },
    /// The effect has (numerically) zero probability on this state.
    Vanished { probability: f64 },
}

impl PostSelection {
    pub fn probability(&self) -> f64 {
        match self {
            Self::Kept { probability, .. } | Self::Vanished { probability } => *probability,
        }
    }

    pub fn state(&self) -> Option<&DensityMatrix> {
        match self {
            Self::Kept { state, .. } => Some(state),
            Self::Vanished { .. } => None,
        }
    }
}

/// Unnormalized branch `√E ρ √E` and its weight `Tr(E ρ)`.
pub fn project(rho: &DensityMatrix, effect: &ComplexMatrix) -> Result<(DensityMatrix, f64)> {
    let dim = rho.dim();
    if effect.rows() != dim || effect.cols() != dim {
        return Err(Error::Dimension("effect does not match the register".into()));
    }
    effect.check_positive(CHANNEL_TOL)?;
    (&ComplexMatrix::identity(dim) - effect).check_positive(CHANNEL_TOL)?;
    let root = effect.psd_sqrt();
    let branch = &(&root * rho.matrix()) * &root;
    let p = rho.expectation(effect)?.re;
    Ok((
        DensityMatrix {
            matrix: branch,
            n_qubits: rho.n_qubits(),
            normalized: false,
        },
        p,
    ))
}

/// `(√E ρ √E / p, p)` with `p = Tr(E ρ)`, or [`PostSelection::Vanished`]
/// when `p < 1e-14`.
pub fn conditional_state(rho: &DensityMatrix, effect: &ComplexMatrix) -> Result<PostSelection> {
    let (branch, p) = project(rho, effect)?;
    if p < VANISHING_PROBABILITY {
        return Ok(PostSelection::Vanished { probability: p.max(0.0) });
    }
    Ok(PostSelection::Kept {
        state: branch.renormalized()?,
        probability: p,
    })
}

/// Common gates.
pub mod gates {
    use super::{re, ComplexMatrix};

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
    }

    pub fn pauli_y() -> ComplexMatrix {
        let z = re(0.0);
        let i = super::c(0.0, 1.0);
        ComplexMatrix::from_rows(2, 2, &[z, -i, i, z]).expect("2x2")
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[1.0, -1.0])
    }

    pub fn hadamard() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(2, 2, &[h, h, h, -h]).expect("2x2")
    }

    /// CNOT with the first (more significant) qubit as control.
    pub fn cnot() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .expect("4x4")
    }

    /// The four single-qubit Paulis `I, X, Y, Z`.
    pub fn paulis() -> [ComplexMatrix; 4] {
        [ComplexMatrix::identity(2), pauli_x(), pauli_y(), pauli_z()]
    }
}
