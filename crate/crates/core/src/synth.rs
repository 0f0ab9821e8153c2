//! Seeded synthetic datasets: unions of subspaces with outliers, low-rank
//! products and duplicated-column stress cases.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SeedError};
use crate::matrix::DataMatrix;

/// Directions shared by two subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlap {
    pub a: usize,
    pub b: usize,
    pub dims: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UoSSpec {
    pub ambient_dim: usize,
    pub subspace_dims: Vec<usize>,
    pub points_per_subspace: Vec<usize>,
    pub overlaps: Vec<Overlap>,
    pub n_outliers: usize,
    /// Standard deviation of entrywise Gaussian noise added to inliers after normalization.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Generated data with ground truth.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: DataMatrix,
    /// Subspace of every column; `None` for outliers.
    pub labels: Vec<Option<usize>>,
    /// Rank of the noiseless data.
    pub rank: usize,
}

impl SynthData {
    pub fn outlier_mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_none).collect()
    }
}

impl UoSSpec {
    /// Frame columns needed: shared blocks plus each subspace's private block.
    fn private_dims(&self) -> Result<Vec<usize>> {
        let s = self.subspace_dims.len();
        let mut shared = vec![0; s];
        for o in &self.overlaps {
            if o.a >= s || o.b >= s || o.a == o.b {
                return Err(SeedError::InvalidConfig(format!(
                    "overlap between subspaces {} and {} is not a valid pair",
                    o.a, o.b
                )));
            }
            if o.dims >= self.subspace_dims[o.a].min(self.subspace_dims[o.b]) {
                return Err(SeedError::InvalidConfig(format!(
                    "overlap of {} dims is not below both subspace dimensions",
                    o.dims
                )));
            }
            shared[o.a] += o.dims;
            shared[o.b] += o.dims;
        }
        self.subspace_dims
            .iter()
            .zip(&shared)
            .enumerate()
            .map(|(i, (&k, &sh))| {
                k.checked_sub(sh).ok_or_else(|| {
                    SeedError::InvalidConfig(format!(
                        "subspace {i} has {k} dims but shares {sh}"
                    ))
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.ambient_dim;
        if m == 0 {
            return Err(SeedError::InvalidConfig("ambient dimension must be positive".into()));
        }
        if self.subspace_dims.len() != self.points_per_subspace.len() {
            return Err(SeedError::InvalidConfig(
                "one point count is needed per subspace".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SeedError::InvalidConfig("noise sigma must be non-negative".into()));
        }
        for (i, (&k, &n)) in self.subspace_dims.iter().zip(&self.points_per_subspace).enumerate() {
            if k == 0 || k >= m {
                return Err(SeedError::InvalidConfig(format!(
                    "subspace {i} dimension {k} must be in 1..{m}"
                )));
            }
            if n > 0 && n < k {
                return Err(SeedError::InvalidConfig(format!(
                    "subspace {i} needs at least {k} points to be spanned, got {n}"
                )));
            }
        }
        let total = self.frame_dims()?;
        if total > m {
            return Err(SeedError::InvalidConfig(format!(
                "subspaces need {total} independent directions but ambient dimension is {m}"
            )));
        }
        if self.total_points() == 0 {
            return Err(SeedError::InvalidConfig("no points requested".into()));
        }
        Ok(())
    }

    fn frame_dims(&self) -> Result<usize> {
        let private: usize = self.private_dims()?.iter().sum();
        Ok(private + self.overlaps.iter().map(|o| o.dims).sum::<usize>())
    }

    pub fn total_points(&self) -> usize {
        self.points_per_subspace.iter().sum::<usize>() + self.n_outliers
    }

    /// Rank of the noiseless union plus outliers, capped at `min(m, N)`.
    pub fn analytic_rank(&self) -> Result<usize> {
        let private = self.private_dims()?;
        let mut used = 0;
        for (i, &p) in private.iter().enumerate() {
            if self.points_per_subspace[i] > 0 {
                used += p;
            }
        }
        for o in &self.overlaps {
            if self.points_per_subspace[o.a] > 0 || self.points_per_subspace[o.b] > 0 {
                used += o.dims;
            }
        }
        Ok((used + self.n_outliers).min(self.ambient_dim).min(self.total_points()))
    }
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

fn unit_gaussian(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Points drawn from each subspace (columns grouped by subspace), then outliers.
pub fn gen_union_of_subspaces(spec: &UoSSpec) -> Result<SynthData> {
    spec.validate()?;
    let m = spec.ambient_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.frame_dims()?;
    let frame = gaussian(&mut rng, m, total).qr().q();

    // Assign frame columns: shared blocks first, then private blocks.
    let s = spec.subspace_dims.len();
    let mut bases: Vec<Vec<usize>> = vec![Vec::new(); s];
    let mut next = 0;
    for o in &spec.overlaps {
        for c in next..next + o.dims {
            bases[o.a].push(c);
            bases[o.b].push(c);
        }
        next += o.dims;
    }
    for (basis, p) in bases.iter_mut().zip(spec.private_dims()?) {
        basis.extend(next..next + p);
        next += p;
    }

    let mut columns = Vec::with_capacity(spec.total_points());
    let mut labels = Vec::with_capacity(spec.total_points());
    for (i, basis) in bases.iter().enumerate() {
        let b = frame.select_columns(basis);
        for _ in 0..spec.points_per_subspace[i] {
            let mut x = loop {
                let c = gaussian(&mut rng, basis.len(), 1);
                let x = &b * c;
                let n = x.norm();
                if n > 0.0 {
                    break x / n;
                }
            };
            if spec.noise_sigma > 0.0 {
                for v in x.iter_mut() {
                    *v += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            columns.push(x.iter().copied().collect::<Vec<f64>>());
            labels.push(Some(i));
        }
    }
    for _ in 0..spec.n_outliers {
        columns.push(unit_gaussian(&mut rng, m));
        labels.push(None);
    }
    Ok(SynthData {
        data: DataMatrix::from_columns(&columns)?,
        labels,
        rank: spec.analytic_rank()?,
    })
}

/// `m × r` times `r × n` Gaussian factors plus optional entrywise noise.
pub fn gen_low_rank(m: usize, n: usize, r: usize, noise_sigma: f64, seed: u64) -> Result<DataMatrix> {
    if r == 0 || r > m.min(n) {
        return Err(SeedError::InvalidConfig(format!(
            "rank must be in 1..={}, got {r}",
            m.min(n)
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SeedError::InvalidConfig("noise sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = gaussian(&mut rng, m, r) * gaussian(&mut rng, r, n);
    if noise_sigma > 0.0 {
        x += gaussian(&mut rng, m, n) * noise_sigma;
    }
    DataMatrix::from_dmatrix(x)
}

/// `distinct` Gaussian columns, each repeated `copies` times; column `j`
/// is a copy of original `j % distinct`.
pub fn gen_duplicated(m: usize, distinct: usize, copies: usize, seed: u64) -> Result<DataMatrix> {
    if m == 0 || distinct == 0 || copies == 0 {
        return Err(SeedError::InvalidConfig("sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = gaussian(&mut rng, m, distinct);
    DataMatrix::from_dmatrix(DMatrix::from_fn(m, distinct * copies, |i, j| base[(i, j % distinct)]))
}

/// Two 20-dim subspaces of ℝ²⁰⁰ sharing 3 dims, 300 + 100 points, 50 outliers (rank 87).
pub fn uos_paper_spec(seed: u64) -> UoSSpec {
    UoSSpec {
        ambient_dim: 200,
        subspace_dims: vec![20, 20],
        points_per_subspace: vec![300, 100],
        overlaps: vec![Overlap { a: 0, b: 1, dims: 3 }],
        n_outliers: 50,
        noise_sigma: 0.0,
        seed,
    }
}

/// Five 20-dim subspaces of ℝ²⁰⁰ in a ring, neighbours sharing 2 dims (span 90),
/// plus 60 outliers: rank 150.
pub fn five_subspace_spec(points_per_subspace: usize, seed: u64) -> UoSSpec {
    UoSSpec {
        ambient_dim: 200,
        subspace_dims: vec![20; 5],
        points_per_subspace: vec![points_per_subspace; 5],
        overlaps: (0..5).map(|i| Overlap { a: i, b: (i + 1) % 5, dims: 2 }).collect(),
        n_outliers: 60,
        noise_sigma: 0.0,
        seed,
    }
}

/// Five independent 20-dim subspaces of ℝ²⁰⁰, no outliers.
pub fn independent_subspaces_spec(points_per_subspace: usize, seed: u64) -> UoSSpec {
    UoSSpec {
        ambient_dim: 200,
        subspace_dims: vec![20; 5],
        points_per_subspace: vec![points_per_subspace; 5],
        overlaps: Vec::new(),
        n_outliers: 0,
        noise_sigma: 0.0,
        seed,
    }
}

/// Named fixtures available from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    UosPaper,
    FiveSubspaces,
    LowRank,
    Duplicated,
}

impl std::str::FromStr for Preset {
    type Err = SeedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uos-paper" => Ok(Preset::UosPaper),
            "five-subspaces" => Ok(Preset::FiveSubspaces),
            "low-rank" => Ok(Preset::LowRank),
            "duplicated" => Ok(Preset::Duplicated),
            other => Err(SeedError::InvalidConfig(format!("unknown preset '{other}'"))),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::UosPaper => "uos-paper",
            Preset::FiveSubspaces => "five-subspaces",
            Preset::LowRank => "low-rank",
            Preset::Duplicated => "duplicated",
        }
    }

    /// Builds the fixture. Low-rank is 50 × 400 of rank 10; duplicated is
    /// 5 distinct columns of ℝ⁵⁰ × 40 copies.
    pub fn generate(self, seed: u64) -> Result<SynthData> {
        match self {
            Preset::UosPaper => gen_union_of_subspaces(&uos_paper_spec(seed)),
            Preset::FiveSubspaces => gen_union_of_subspaces(&five_subspace_spec(100, seed)),
            Preset::LowRank => Ok(SynthData {
                data: gen_low_rank(50, 400, 10, 0.0, seed)?,
                labels: vec![Some(0); 400],
                rank: 10,
            }),
            Preset::Duplicated => Ok(SynthData {
                data: gen_duplicated(50, 5, 40, seed)?,
                labels: (0..200).map(|j| Some(j % 5)).collect(),
                rank: 5,
            }),
        }
    }
}
