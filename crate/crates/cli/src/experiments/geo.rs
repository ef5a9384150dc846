//! Migration-style flows between consecutive weekly snapshots.

use std::fmt::Write;

use nalgebra::DMatrix;
use reshape_ot::datasets::{
    latlon_to_cartesian, read_geo_csv, read_id_list, select_displacements, weekly_snapshots, SnapshotWindow, WeekKey,
};
use reshape_ot::evaluation::transport_error;
use reshape_ot::geometry::{cost_matrix, squared_euclidean_costs, DisplacementSet, GroundMetric, PointCloud};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::methods::transport;
use crate::output::RunOutput;
use crate::results::ResultRow;
use crate::svg::{self, Bounds, PointLayer};

fn parse_week(s: &str) -> Result<WeekKey, CliError> {
    let bad = || CliError::Config(format!("week '{s}' is not of the form YYYY-Www"));
    let (y, w) = s.split_once("-W").ok_or_else(bad)?;
    Ok(WeekKey { year: y.parse().map_err(|_| bad())?, week: w.parse().map_err(|_| bad())? })
}

/// `(lon, lat)` in degrees for each unit-sphere row, for equirectangular display.
fn to_lonlat(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), 2, |i, j| {
        let (x, y, z) = (m[(i, 0)], m[(i, 1)], m[(i, 2)]);
        if j == 0 {
            y.atan2(x).to_degrees()
        } else {
            (z / (x * x + y * y + z * z).sqrt()).clamp(-1.0, 1.0).asin().to_degrees()
        }
    })
}

fn cost_field(
    metric: &GroundMetric,
    reference: (f64, f64),
    bounds: &Bounds,
    resolution: usize,
) -> Result<DMatrix<f64>, CliError> {
    let r = latlon_to_cartesian(reference.1, reference.0)?;
    let origin = PointCloud::from_rows(&[r.to_vec()])?;
    let mut cells = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            let lon = bounds.x.0 + (col as f64 + 0.5) / resolution as f64 * (bounds.x.1 - bounds.x.0);
            let lat = bounds.y.0 + (row as f64 + 0.5) / resolution as f64 * (bounds.y.1 - bounds.y.0);
            cells.push(latlon_to_cartesian(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))?.to_vec());
        }
    }
    let grid = PointCloud::from_rows(&cells)?;
    let c = cost_matrix(metric, &origin, &grid)?;
    Ok(DMatrix::from_fn(resolution, resolution, |row, col| c[(0, row * resolution + col)].sqrt()))
}

fn coupling_csv(plan: &DMatrix<f64>, ids: &[String]) -> String {
    let mut s = String::from("source_index,source_id,target_index,mass\n");
    for i in 0..plan.nrows() {
        for j in 0..plan.ncols() {
            if plan[(i, j)] > 0.0 {
                let _ = writeln!(s, "{i},{},{j},{}", ids[i], plan[(i, j)]);
            }
        }
    }
    s
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let geo = &config.geo;
    let data = geo.data.as_ref().ok_or_else(|| CliError::Config("geo.data is required".into()))?;
    if !data.exists() {
        return Err(CliError::Data(format!("geo data file {} not found", data.display())));
    }
    let records = read_geo_csv(data)?;
    let ids = match &geo.guidance_ids {
        Some(p) if !p.exists() => return Err(CliError::Data(format!("guidance id file {} not found", p.display()))),
        Some(p) => read_id_list(p)?,
        None => Vec::new(),
    };
    let window = match &geo.window {
        Some([a, b]) => Some(SnapshotWindow { first: parse_week(a)?, last: parse_week(b)? }),
        None => None,
    };
    let seed = config.base_seed;
    let snaps = weekly_snapshots(&records, window, &ids, seed)?;
    if snaps.pairs.is_empty() {
        return Err(CliError::Data("no consecutive-week displacements in the snapshot window".into()));
    }
    let (xs, xt) = snaps.pooled();
    let pair_ids: Vec<String> = snaps.pairs.iter().flat_map(|p| p.ids.iter().cloned()).collect();
    let sq_euclid = squared_euclidean_costs(&xs, &xt);

    let mut out = RunOutput { seeds: vec![seed], ..Default::default() };
    let exp = config.experiment.name();
    let lonlat_s = to_lonlat(&xs);
    let lonlat_t = to_lonlat(&xt);
    let guide_lonlat = snaps.guidance.as_ref().map(|g| (to_lonlat(g.sources()), to_lonlat(g.targets())));
    let mut bound_sets = vec![&lonlat_s, &lonlat_t];
    if let Some((gs, gt)) = &guide_lonlat {
        bound_sets.push(gs);
        bound_sets.push(gt);
    }
    let bounds = Bounds::around(bound_sets);
    let reference = match (geo.reference, &guide_lonlat) {
        (Some([lat, lon]), _) => (lon, lat),
        (None, Some((gs, _))) => (gs[(0, 0)], gs[(0, 1)]),
        (None, None) => (lonlat_s[(0, 0)], lonlat_s[(0, 1)]),
    };

    for method in &config.methods {
        let guidance: Option<DisplacementSet> = if !method.is_guided() {
            None
        } else {
            let g = snaps
                .guidance
                .as_ref()
                .ok_or_else(|| CliError::Data("no guidance displacements survived preprocessing".into()))?;
            if method.permutes_guidance() {
                Some(select_displacements(g.sources(), g.targets(), g.n_sources(), seed, true)?.displacements()?)
            } else {
                Some(g.clone())
            }
        };
        let n_disp = guidance.as_ref().map_or(0, DisplacementSet::n_sources);
        let t = transport(method, guidance.as_ref(), &xs, &xt)?;
        let row = ResultRow::for_method(exp, method, n_disp, 0.0, 0, seed);
        out.rows.push(row.metric("transport_error", transport_error(&xt, &t.predicted)?));
        out.rows.push(row.metric("objective", t.coupling.objective));
        out.rows.push(row.metric("sq_euclidean_cost", t.coupling.cost_under(&sq_euclid)));
        out.extra_files.push((format!("coupling_{}.csv", method.label()), coupling_csv(&t.coupling.plan, &pair_ids)));

        if config.svg {
            let mut layers = vec![
                PointLayer { points: &lonlat_s, color: svg::PALETTE[0], label: "source week" },
                PointLayer { points: &lonlat_t, color: svg::PALETTE[1], label: "target week" },
            ];
            let mut arrows = vec![svg::coupling_arrows(&t.coupling.plan, &lonlat_s, &lonlat_t, "#888")];
            if let (Some((gs, gt)), true) = (&guide_lonlat, method.is_guided()) {
                layers.push(PointLayer { points: gs, color: svg::PALETTE[2], label: "guidance" });
                let n = gs.nrows();
                arrows.push(svg::coupling_arrows(&(DMatrix::identity(n, n) / n as f64), gs, gt, svg::PALETTE[2]));
            }
            out.figures.push((
                format!("flows_{}.svg", method.label()),
                svg::scatter(
                    &format!("{} flows", method.label()),
                    "equirectangular lon/lat display; distances computed on the unit sphere",
                    bounds,
                    &layers,
                    &arrows,
                ),
            ));
            let field = cost_field(&t.metric, reference, &bounds, config.grid_resolution)?;
            out.figures.push((
                format!("cost_field_{}.svg", method.label()),
                svg::heat_grid(
                    &format!("{} square-root cost from reference", method.label()),
                    "equirectangular lon/lat display",
                    bounds,
                    &field,
                    Some(reference),
                ),
            ));
        }
    }
    out.notes.insert("weeks".into(), serde_json::json!(snaps.weeks.iter().map(ToString::to_string).collect::<Vec<_>>()));
    out.notes.insert("week_pairs".into(), serde_json::json!(snaps.pairs.len()));
    out.notes.insert("population_displacements".into(), serde_json::json!(xs.nrows()));
    out.notes.insert(
        "guidance_displacements".into(),
        serde_json::json!(snaps.guidance.as_ref().map_or(0, DisplacementSet::n_sources)),
    );
    out.notes.insert("outlier_threshold_chordal".into(), serde_json::json!(snaps.threshold));
    out.notes.insert("outliers_removed".into(), serde_json::json!(snaps.removed_outliers));
    out.notes.insert("cost_field_reference_lon_lat".into(), serde_json::json!([reference.0, reference.1]));
    Ok(out)
}
