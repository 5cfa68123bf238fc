// SPDX-License-Identifier: Apache-2.0

//! Scenario definitions as data: initial curve, density and forcing.

use std::sync::Arc;

use anisoflow::verify::eoc_initial_curve;
use anisoflow::{
    circle, geodesic_bundle, mikula_curve, Bundle, Curve, Density, Forcing, GraphSurface,
    MountainSurface, Vec2,
};

use crate::config::{DensitySpec, ScenarioConfig, ScenarioName};

pub struct Scenario {
    pub initial: Curve,
    pub bundle: Bundle,
    pub forcing: Forcing<f64>,
    /// Surface to lift frames onto, for geodesic scenarios.
    pub surface: Option<Arc<dyn GraphSurface<f64>>>,
}

pub fn build(config: &ScenarioConfig) -> Result<Scenario, anisoflow::Error> {
    let j = config.elements;
    let initial = match config.scenario {
        ScenarioName::KfoldMikula | ScenarioName::KfoldForced => Curve::sample(j, mikula_curve)?,
        ScenarioName::GeodesicCentered => {
            Curve::sample(j, circle(MountainSurface::<f64>::default().centroid(), 2.0))?
        }
        ScenarioName::GeodesicOffset => Curve::sample(j, circle(Vec2::new(0.0, 0.5), 2.0))?,
        ScenarioName::IsotropicCircle => Curve::sample(j, circle(Vec2::new(0.0, 0.0), 1.0))?,
        ScenarioName::EllipticEoc => Curve::sample(j, eoc_initial_curve)?,
    };
    let mut surface = None;
    let bundle = match config.density {
        DensitySpec::Isotropic => Bundle::isotropic(),
        DensitySpec::KFold { k, delta } => Bundle::with_default_split(Density::kfold(k, delta)?),
        DensitySpec::Elliptic { delta } => Bundle::with_default_split(Density::elliptic(delta)?),
        DensitySpec::Mountain => {
            let s: Arc<dyn GraphSurface<f64>> = Arc::new(MountainSurface::default());
            surface = Some(s.clone());
            geodesic_bundle(s, config.c_phi)?
        }
    };
    let forcing = if config.forcing == 0.0 {
        Forcing::None
    } else {
        Forcing::Constant(config.forcing)
    };
    Ok(Scenario {
        initial,
        bundle,
        forcing,
        surface,
    })
}
