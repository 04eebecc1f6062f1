//! Turns a validated config into grids, fracture mesh, properties and
//! sources. Every input file is read here, before anything is written.

use anyhow::{Context, Result};
use nlmc_core::fine_system::{
    parse_raster, Continuum, ContinuumProperties, ExchangeRule, FineOperators, FractureProperties,
    Source,
};
use nlmc_core::geometry::{mesh_fractures, FineGrid, FractureGeometry, FractureMesh, Rect};
use nlmc_core::nlmc::{ExchangeVariant, UpscaleOptions};
use nlmc_core::metrics::CoarseWeighting;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    ExchangeConfig, ExchangeVariantName, ExperimentConfig, RandomFieldConfig, SourceContinuum,
    WeightingName,
};

#[derive(Debug)]
pub struct Problem {
    pub config: ExperimentConfig,
    pub fine: FineGrid,
    pub geometry: FractureGeometry,
    pub fmesh: FractureMesh,
    pub properties: ContinuumProperties,
    pub sources: Vec<Source>,
    /// Fine cells receiving each source.
    pub source_cells: Vec<usize>,
}

impl Problem {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let [x0, y0, x1, y1] = config.grid.domain;
        let fine = FineGrid::new(config.grid.fine[0], config.grid.fine[1], Rect::new(x0, y0, x1, y1))?;
        let path = config.resolve(&config.fractures);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read fracture file {}", path.display()))?;
        let geometry = FractureGeometry::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let fmesh = mesh_fractures(&fine, &geometry).with_context(|| format!("meshing {}", path.display()))?;
        let properties = properties(&config, &fine, &fmesh)?;
        let sources: Vec<Source> = config
            .sources
            .iter()
            .map(|s| Source {
                rect: Rect::new(s.rect[0], s.rect[1], s.rect[2], s.rect[3]),
                continuum: match s.continuum {
                    SourceContinuum::Matrix1 => Continuum::Matrix(0),
                    SourceContinuum::Matrix2 => Continuum::Matrix(1),
                    SourceContinuum::Fracture => Continuum::Fracture,
                },
                rate: s.rate,
            })
            .collect();
        let source_cells = sources
            .iter()
            .map(|s| match s.continuum {
                Continuum::Matrix(_) => (0..fine.num_cells()).filter(|&c| s.rect.contains(fine.cell_center(c))).count(),
                Continuum::Fracture => fmesh.cells().iter().filter(|c| s.rect.contains(c.midpoint)).count(),
            })
            .collect();
        Ok(Self { config, fine, geometry, fmesh, properties, sources, source_cells })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::new(ExperimentConfig::load(path)?)
    }

    pub fn operators(&self) -> Result<FineOperators> {
        FineOperators::assemble(&self.fine, &self.fmesh, &self.properties, &self.sources)
            .context("assembling fine operators")
    }

    pub fn upscale_options(&self) -> UpscaleOptions {
        UpscaleOptions {
            exchange: match self.config.nlmc.exchange {
                ExchangeVariantName::Full => ExchangeVariant::Full,
                ExchangeVariantName::Diagonal => ExchangeVariant::Diagonal,
            },
            zero_row_sum: self.config.nlmc.zero_row_sum,
        }
    }

    pub fn weighting(&self) -> CoarseWeighting {
        match self.config.nlmc.error_weighting {
            WeightingName::Unweighted => CoarseWeighting::Unweighted,
            WeightingName::Volume => CoarseWeighting::Volume,
        }
    }
}

fn properties(cfg: &ExperimentConfig, fine: &FineGrid, fmesh: &FractureMesh) -> Result<ContinuumProperties> {
    let p = &cfg.properties;
    let n = fine.num_cells();
    let field = |constant: f64, raster: &Option<std::path::PathBuf>| -> Result<Vec<f64>> {
        match raster {
            None => Ok(vec![constant; n]),
            Some(r) => {
                let path = cfg.resolve(r);
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read raster {}", path.display()))?;
                parse_raster(&text, fine.nx(), fine.ny()).with_context(|| format!("in {}", path.display()))
            }
        }
    };
    let mut k1 = field(p.k1, &p.k1_raster)?;
    let mut k2 = field(p.k2, &p.k2_raster)?;
    if let Some(rf) = &p.random_field {
        let mut rng = ChaCha8Rng::seed_from_u64(rf.seed);
        for k in [&mut k1, &mut k2] {
            for (v, m) in k.iter_mut().zip(log_uniform_multipliers(&mut rng, fine, rf)) {
                *v *= m;
            }
        }
    }
    let rule = match p.exchange {
        ExchangeConfig::Rule(_) => ExchangeRule::Permeability,
        ExchangeConfig::Constant { sigma12, sigma1f, sigma2f } => ExchangeRule::Constant { sigma12, sigma1f, sigma2f },
    };
    let fracture = vec![FractureProperties { kf: p.kf, bf: p.bf }; fmesh.num_networks()];
    Ok(ContinuumProperties::triple(k1, k2, p.c1, p.c2, fracture, p.cf, rule))
}

/// `10^u` with `u ~ U(-d, d)`, one draw per block of fine cells, blocks in
/// row-major order.
pub fn log_uniform_multipliers(rng: &mut ChaCha8Rng, fine: &FineGrid, rf: &RandomFieldConfig) -> Vec<f64> {
    let bx = fine.nx().div_ceil(rf.block);
    let by = fine.ny().div_ceil(rf.block);
    let draws: Vec<f64> = (0..bx * by)
        .map(|_| if rf.decades > 0.0 { 10f64.powf(rng.gen_range(-rf.decades..=rf.decades)) } else { 1.0 })
        .collect();
    (0..fine.num_cells())
        .map(|c| {
            let (i, j) = fine.cell_ij(c);
            draws[(j / rf.block) * bx + i / rf.block]
        })
        .collect()
}
