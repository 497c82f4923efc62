//! Deterministic procedural generator of labelled reference/test scan pairs.
//!
//! Scenes are parametric surfaces (plane or cylindrical arch) sampled on a
//! regular grid with brick/mortar roughness and an intensity texture, both
//! driven by counter-based hashes of the scene seed so output is identical
//! for any worker count. Defects are injected into the test cloud only:
//! cracks apply an analytic deformation field across a crack line (and, for
//! intrados cracks, insert V-groove wall points with darkened intensity),
//! while water patches darken intensities without touching geometry.

use crate::cloud::{Label, PointCloud};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Base surface of an inspection scene, parameterized by `(u, v)` where `u`
/// runs across the width (arc length for arches) and `v` along the length.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Plane { width: f64, length: f64 },
    /// Arch: cylinder segment with horizontal axis along `v`; the crown sits
    /// at the top and the scanner looks up from the axis.
    CylindricalArch {
        radius: f64,
        span_angle: f64,
        length: f64,
    },
}

impl Surface {
    fn extent_u(&self) -> f64 {
        match self {
            Surface::Plane { width, .. } => *width,
            Surface::CylindricalArch { radius, span_angle, .. } => radius * span_angle,
        }
    }

    fn extent_v(&self) -> f64 {
        match self {
            Surface::Plane { length, .. } => *length,
            Surface::CylindricalArch { length, .. } => *length,
        }
    }

    /// Base point at (u, v) before roughness and noise.
    fn point(&self, u: f64, v: f64) -> [f64; 3] {
        match self {
            Surface::Plane { .. } => [u, v, 0.0],
            Surface::CylindricalArch { radius, span_angle, .. } => {
                let theta = -span_angle / 2.0 + u / radius;
                [radius * theta.sin(), v, radius * theta.cos()]
            }
        }
    }

    /// Unit direction from the surface into the material (away from the
    /// scanner): -z for a plane scanned from above, radially outward for an
    /// arch scanned from the axis.
    fn into_material(&self, u: f64) -> [f64; 3] {
        match self {
            Surface::Plane { .. } => [0.0, 0.0, -1.0],
            Surface::CylindricalArch { radius, span_angle, .. } => {
                let theta = -span_angle / 2.0 + u / radius;
                [theta.sin(), 0.0, theta.cos()]
            }
        }
    }

    /// Unit surface tangent in the +u direction at (u, *).
    fn tangent_u(&self, u: f64) -> [f64; 3] {
        match self {
            Surface::Plane { .. } => [1.0, 0.0, 0.0],
            Surface::CylindricalArch { radius, span_angle, .. } => {
                let theta = -span_angle / 2.0 + u / radius;
                [theta.cos(), 0.0, -theta.sin()]
            }
        }
    }

    /// A sensible scanner position for normal orientation.
    pub fn viewpoint(&self) -> [f64; 3] {
        match self {
            Surface::Plane { width, length } => [width / 2.0, length / 2.0, 5.0],
            Surface::CylindricalArch { length, .. } => [0.0, length / 2.0, 0.0],
        }
    }
}

/// Brick/mortar surface relief.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Roughness {
    /// Depth amplitude in meters.
    pub amplitude: f64,
    /// Brick cell size in meters.
    pub cell_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    IntradosCrack,
    ExtradosCrack,
    WaterPatch,
}

/// Analytic stand-in for the mechanics that open a crack.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deformation {
    None,
    /// Rigid rotation (radians) about the crack line, applied to the
    /// positive-u side.
    Hinge { angle: f64 },
    /// Displacement (m) ramped linearly from zero at the crack line to the
    /// full vector at the far edge of the positive-u side.
    Support { displacement: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    /// Crack line coordinate `u = position` (cracks run along v), or the
    /// footprint center u for water patches.
    pub position: f64,
    /// Footprint center v (water patches only).
    #[serde(default)]
    pub center_v: f64,
    /// Footprint semi-axes (water patches only).
    #[serde(default)]
    pub radius_u: f64,
    #[serde(default)]
    pub radius_v: f64,
    /// Crack opening width in meters.
    #[serde(default)]
    pub width: f64,
    /// V-groove height in meters (intrados cracks only).
    #[serde(default)]
    pub depth: f64,
    /// Intensity darkening for groove walls and water patches.
    #[serde(default)]
    pub intensity_drop: f64,
    #[serde(default = "default_deformation")]
    pub deformation: Deformation,
}

fn default_deformation() -> Deformation {
    Deformation::None
}

/// Declarative description of a synthetic inspection scene.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneSpec {
    pub surface: Surface,
    /// Target point spacing in meters.
    pub spacing: f64,
    pub roughness: Roughness,
    /// Isotropic Gaussian position noise, identical in both clouds.
    pub noise_sigma: f64,
    pub base_intensity: f64,
    pub intensity_texture_amplitude: f64,
    pub seed: u64,
    pub defects: Vec<DefectSpec>,
}

/// Reference (defect-free) and test (defects applied) clouds from one spec.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub reference: PointCloud,
    pub test: PointCloud,
}

pub const PRESET_NAMES: [&str; 5] = [
    "arch_x_move",
    "arch_z_move",
    "arch_xz",
    "tunnel_ovalization",
    "water_only",
];

/// Fully-populated deterministic scene for a named scenario.
pub fn preset(name: &str) -> Result<SceneSpec> {
    let arch = Surface::CylindricalArch {
        radius: 1.375,
        span_angle: 2.6,
        length: 2.0,
    };
    let arch_roughness = Roughness {
        amplitude: 0.0015,
        cell_size: 0.22,
    };
    let base = SceneSpec {
        surface: arch.clone(),
        spacing: 0.02,
        roughness: arch_roughness.clone(),
        noise_sigma: 0.0005,
        base_intensity: 0.6,
        intensity_texture_amplitude: 0.05,
        seed: 7,
        defects: Vec::new(),
    };
    let intrados = |position: f64, displacement: [f64; 3]| DefectSpec {
        kind: DefectKind::IntradosCrack,
        position,
        center_v: 0.0,
        radius_u: 0.0,
        radius_v: 0.0,
        width: 0.04,
        depth: 0.1,
        intensity_drop: 0.4,
        deformation: Deformation::Support { displacement },
    };
    let extrados = |position: f64, angle: f64| DefectSpec {
        kind: DefectKind::ExtradosCrack,
        position,
        center_v: 0.0,
        radius_u: 0.0,
        radius_v: 0.0,
        width: 0.06,
        depth: 0.0,
        intensity_drop: 0.0,
        deformation: Deformation::Hinge { angle },
    };
    match name {
        "arch_x_move" => Ok(SceneSpec {
            defects: vec![
                extrados(1.1, 0.2),
                intrados(2.0, [0.02, 0.0, 0.0]),
            ],
            ..base
        }),
        "arch_z_move" => Ok(SceneSpec {
            defects: vec![
                extrados(1.3, -0.1),
                intrados(2.3, [0.0, 0.0, -0.02]),
            ],
            ..base
        }),
        "arch_xz" => Ok(SceneSpec {
            defects: vec![
                extrados(1.0, 0.1),
                intrados(1.9, [0.015, 0.0, -0.015]),
                intrados(2.6, [0.01, 0.0, -0.01]),
            ],
            ..base
        }),
        "tunnel_ovalization" => {
            let ring = Surface::CylindricalArch {
                radius: 1.375,
                span_angle: 6.2,
                length: 1.2,
            };
            let u_at = |theta_frac: f64| 1.375 * 6.2 * theta_frac;
            Ok(SceneSpec {
                surface: ring,
                spacing: 0.025,
                roughness: Roughness {
                    amplitude: 0.0005,
                    cell_size: 0.3,
                },
                defects: vec![
                    extrados(u_at(0.22), 0.05),
                    intrados(u_at(0.45), [0.0, 0.0, -0.015]),
                    extrados(u_at(0.68), -0.05),
                    intrados(u_at(0.85), [0.01, 0.0, 0.0]),
                ],
                ..base
            })
        }
        "water_only" => Ok(SceneSpec {
            surface: Surface::Plane {
                width: 4.0,
                length: 3.0,
            },
            spacing: 0.02,
            roughness: Roughness {
                amplitude: 0.0008,
                cell_size: 0.25,
            },
            noise_sigma: 0.0005,
            base_intensity: 0.7,
            intensity_texture_amplitude: 0.04,
            seed: 7,
            defects: vec![DefectSpec {
                kind: DefectKind::WaterPatch,
                position: 2.0,
                center_v: 1.5,
                radius_u: 0.5,
                radius_v: 0.4,
                width: 0.0,
                depth: 0.0,
                intensity_drop: 0.5,
                deformation: Deformation::None,
            }],
            ..base
        }),
        other => Err(Error::parameter(format!(
            "unknown preset '{other}' (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Load a scene description from a TOML file.
pub fn load_spec(path: &std::path::Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Save a scene description as TOML.
pub fn save_spec(spec: &SceneSpec, path: &std::path::Path) -> Result<()> {
    let text = toml::to_string_pretty(spec)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generate the reference/test pair for a scene.
pub fn generate(spec: &SceneSpec) -> Result<LabeledPair> {
    validate(spec)?;

    let extent_u = spec.surface.extent_u();
    let extent_v = spec.surface.extent_v();
    let nu = (extent_u / spec.spacing).floor() as usize + 1;
    let nv = (extent_v / spec.spacing).floor() as usize + 1;

    // Base surface, shared between reference and test.
    let n = nu * nv;
    let mut positions = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n);
    for i in 0..nu {
        let u = i as f64 * spec.spacing;
        for j in 0..nv {
            let v = j as f64 * spec.spacing;
            let mut p = spec.surface.point(u, v);
            let depth = roughness_depth(spec, u, v);
            let inward = spec.surface.into_material(u);
            for a in 0..3 {
                p[a] += depth * inward[a];
            }
            if spec.noise_sigma > 0.0 {
                let jitter = gaussian3(spec.seed, (i * nv + j) as u64);
                for a in 0..3 {
                    p[a] += spec.noise_sigma * jitter[a];
                }
            }
            positions.push(p);
            intensities.push(texture_intensity(spec, u, v));
            params.push((u, v));
        }
    }

    let reference = PointCloud::with_raw(
        positions.clone(),
        intensities.clone(),
        intensities.iter().map(|&x| x as f32).collect(),
        None,
        "reference".to_string(),
    )?;

    // Test cloud: start from the same base and inject defects.
    let mut test_positions = positions;
    let mut test_intensities = intensities;
    let mut labels = vec![Label::None; n];

    // Intensity defects and surface labels first (they key off undeformed
    // parameters), then groove insertion, then deformation fields.
    for defect in &spec.defects {
        match defect.kind {
            DefectKind::WaterPatch => {
                for idx in 0..n {
                    let (u, v) = params[idx];
                    let du = (u - defect.position) / defect.radius_u;
                    let dv = (v - defect.center_v) / defect.radius_v;
                    let rho = (du * du + dv * dv).sqrt();
                    if rho <= 1.0 {
                        test_intensities[idx] =
                            (test_intensities[idx] - defect.intensity_drop * (1.0 - rho)).max(0.0);
                        labels[idx] = Label::WaterPatch;
                    }
                }
            }
            DefectKind::IntradosCrack | DefectKind::ExtradosCrack => {
                let label = if defect.kind == DefectKind::IntradosCrack {
                    Label::IntradosCrack
                } else {
                    Label::ExtradosCrack
                };
                let half = defect.width / 2.0;
                for idx in 0..n {
                    if (params[idx].0 - defect.position).abs() <= half
                        && labels[idx] == Label::None
                    {
                        labels[idx] = label;
                    }
                }
            }
        }
    }

    // V-groove walls for intrados cracks.
    for defect in &spec.defects {
        if defect.kind != DefectKind::IntradosCrack {
            continue;
        }
        let (walls, wall_params) = groove_points(spec, defect, nv);
        let groove_intensity = (spec.base_intensity - defect.intensity_drop).max(0.0);
        for (p, param) in walls.into_iter().zip(wall_params) {
            test_positions.push(p);
            test_intensities.push(groove_intensity);
            labels.push(Label::InnerCrack);
            params.push(param);
        }
    }

    // Deformation fields, applied to every point on the positive-u side.
    for defect in &spec.defects {
        apply_deformation(spec, defect, &params, &mut test_positions);
    }

    let test = PointCloud::with_raw(
        test_positions,
        test_intensities.clone(),
        test_intensities.iter().map(|&x| x as f32).collect(),
        Some(labels),
        "test".to_string(),
    )?;

    Ok(LabeledPair { reference, test })
}

fn validate(spec: &SceneSpec) -> Result<()> {
    if !(spec.spacing > 0.0) {
        return Err(Error::parameter("spacing must be positive"));
    }
    if spec.roughness.amplitude < 0.0 || spec.noise_sigma < 0.0 {
        return Err(Error::parameter("amplitudes must be non-negative"));
    }
    if spec.roughness.amplitude > 0.0 && !(spec.roughness.cell_size > 0.0) {
        return Err(Error::parameter("roughness cell size must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.base_intensity) {
        return Err(Error::parameter("base intensity must lie in [0, 1]"));
    }
    if let Surface::CylindricalArch { radius, span_angle, .. } = spec.surface {
        if !(radius > 0.0) || !(span_angle > 0.0) {
            return Err(Error::parameter("arch radius and span must be positive"));
        }
    }
    let extent_u = spec.surface.extent_u();
    let extent_v = spec.surface.extent_v();
    for (i, d) in spec.defects.iter().enumerate() {
        match d.kind {
            DefectKind::WaterPatch => {
                if !(d.radius_u > 0.0) || !(d.radius_v > 0.0) {
                    return Err(Error::parameter(format!("defect {i}: patch radii must be positive")));
                }
                if d.position - d.radius_u < 0.0
                    || d.position + d.radius_u > extent_u
                    || d.center_v - d.radius_v < 0.0
                    || d.center_v + d.radius_v > extent_v
                {
                    return Err(Error::parameter(format!(
                        "defect {i}: water patch footprint outside surface extent"
                    )));
                }
                if d.intensity_drop < 0.0 || d.intensity_drop > spec.base_intensity {
                    return Err(Error::parameter(format!(
                        "defect {i}: intensity drop must lie in [0, base_intensity]"
                    )));
                }
            }
            DefectKind::IntradosCrack | DefectKind::ExtradosCrack => {
                if !(d.width > 0.0) {
                    return Err(Error::parameter(format!("defect {i}: crack width must be positive")));
                }
                if d.position < 0.0 || d.position > extent_u {
                    return Err(Error::parameter(format!(
                        "defect {i}: crack line outside surface extent"
                    )));
                }
                if d.kind == DefectKind::IntradosCrack && !(d.depth > 0.0) {
                    return Err(Error::parameter(format!(
                        "defect {i}: intrados crack needs a positive groove depth"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Wall points of the V-groove opened by an intrados crack: cross-section an
/// isosceles triangle of height `depth` and base `width`, sampled at the
/// surface spacing along both the crack and the walls.
fn groove_points(
    spec: &SceneSpec,
    defect: &DefectSpec,
    nv: usize,
) -> (Vec<[f64; 3]>, Vec<(f64, f64)>) {
    let u_c = defect.position;
    let half = defect.width / 2.0;
    let wall_len = (defect.depth * defect.depth + half * half).sqrt();
    let nd = (wall_len / spec.spacing).round().max(1.0) as usize;
    let tangent = spec.surface.tangent_u(u_c);
    let inward = spec.surface.into_material(u_c);

    let mut points = Vec::new();
    let mut params = Vec::new();
    for j in 0..nv {
        let v = j as f64 * spec.spacing;
        let base = spec.surface.point(u_c, v);
        for k in 1..=nd {
            let f = k as f64 / nd as f64;
            let depth = defect.depth * f;
            let across = half * (1.0 - f);
            let sides: &[f64] = if k == nd { &[1.0] } else { &[-1.0, 1.0] };
            for &side in sides {
                let mut p = base;
                for a in 0..3 {
                    p[a] += depth * inward[a] + side * across * tangent[a];
                }
                points.push(p);
                params.push((u_c + side * across, v));
            }
        }
    }
    (points, params)
}

fn apply_deformation(
    spec: &SceneSpec,
    defect: &DefectSpec,
    params: &[(f64, f64)],
    positions: &mut [[f64; 3]],
) {
    let u_c = defect.position;
    let extent_u = spec.surface.extent_u();
    match &defect.deformation {
        Deformation::None => {}
        Deformation::Hinge { angle } => {
            // Rotate the positive-u side rigidly about the crack line, which
            // runs along v (the global y axis) through the anchor point.
            let anchor = spec.surface.point(u_c, 0.0);
            let (sin, cos) = angle.sin_cos();
            for (idx, p) in positions.iter_mut().enumerate() {
                if params[idx].0 > u_c {
                    let dx = p[0] - anchor[0];
                    let dz = p[2] - anchor[2];
                    p[0] = anchor[0] + cos * dx + sin * dz;
                    p[2] = anchor[2] - sin * dx + cos * dz;
                }
            }
        }
        Deformation::Support { displacement } => {
            let span = (extent_u - u_c).max(f64::MIN_POSITIVE);
            for (idx, p) in positions.iter_mut().enumerate() {
                let t = ((params[idx].0 - u_c) / span).clamp(0.0, 1.0);
                if t > 0.0 {
                    for a in 0..3 {
                        p[a] += t * displacement[a];
                    }
                }
            }
        }
    }
}

fn roughness_depth(spec: &SceneSpec, u: f64, v: f64) -> f64 {
    if spec.roughness.amplitude == 0.0 {
        return 0.0;
    }
    let cell = spec.roughness.cell_size;
    let cu = (u / cell).floor() as i64;
    let cv = (v / cell).floor() as i64;
    let fu = u / cell - cu as f64;
    let fv = v / cell - cv as f64;
    // Mortar joints are recessed strips along cell borders; brick faces get
    // a per-cell depth.
    let mortar = 0.12;
    if fu < mortar || fv < mortar {
        spec.roughness.amplitude
    } else {
        spec.roughness.amplitude * (hash01(spec.seed ^ 0xb5ad_4ece_da1c_e2a9, cu, cv) - 0.5)
    }
}

fn texture_intensity(spec: &SceneSpec, u: f64, v: f64) -> f64 {
    if spec.intensity_texture_amplitude == 0.0 {
        return spec.base_intensity.clamp(0.0, 1.0);
    }
    let cell = spec.roughness.cell_size.max(spec.spacing);
    let cu = (u / cell).floor() as i64;
    let cv = (v / cell).floor() as i64;
    let t = hash01(spec.seed ^ 0x94d0_49bb_1331_11eb, cu, cv) - 0.5;
    (spec.base_intensity + 2.0 * spec.intensity_texture_amplitude * t).clamp(0.0, 1.0)
}

/// splitmix64-based hash of (seed, a, b) mapped to [0, 1).
fn hash01(seed: u64, a: i64, b: i64) -> f64 {
    let mut x = seed
        .wrapping_add((a as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((b as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Three standard normals from a counter-based stream.
fn gaussian3(seed: u64, counter: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ counter.wrapping_mul(0x2545_f491_4f6c_dd1d));
    let mut out = [0.0; 3];
    let mut i = 0;
    while i < 3 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        out[i] = r * c;
        i += 1;
        if i < 3 {
            out[i] = r * s;
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_defects_means_identical_pair() {
        let mut spec = preset("water_only").unwrap();
        spec.defects.clear();
        spec.noise_sigma = 0.0;
        let pair = generate(&spec).unwrap();
        assert_eq!(pair.reference.positions, pair.test.positions);
        assert_eq!(pair.reference.intensities, pair.test.intensities);
        assert!(pair.test.labels.as_ref().unwrap().iter().all(|&l| l == Label::None));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = preset("arch_x_move").unwrap();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.reference, b.reference);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn intrados_crack_produces_darkened_groove_points() {
        let mut spec = preset("arch_x_move").unwrap();
        spec.intensity_texture_amplitude = 0.0;
        let pair = generate(&spec).unwrap();
        let labels = pair.test.labels.as_ref().unwrap();
        let inner: Vec<usize> = (0..pair.test.len())
            .filter(|&i| labels[i] == Label::InnerCrack)
            .collect();
        assert!(!inner.is_empty());
        let drop = spec.defects.iter().find(|d| d.kind == DefectKind::IntradosCrack).unwrap();
        let expected = spec.base_intensity - drop.intensity_drop;
        let mean: f64 =
            inner.iter().map(|&i| pair.test.intensities[i]).sum::<f64>() / inner.len() as f64;
        assert!((mean - expected).abs() < 1e-9, "mean {mean} expected {expected}");
    }

    #[test]
    fn water_patch_changes_intensity_but_not_geometry() {
        let spec = preset("water_only").unwrap();
        let pair = generate(&spec).unwrap();
        let mut clean = spec.clone();
        clean.defects.clear();
        let base = generate(&clean).unwrap();

        let labels = pair.test.labels.as_ref().unwrap();
        let patch: Vec<usize> = (0..base.test.len())
            .filter(|&i| labels[i] == Label::WaterPatch)
            .collect();
        assert!(!patch.is_empty());
        for &i in &patch {
            assert_eq!(pair.test.positions[i], base.test.positions[i]);
        }
        // Intensity strictly lower at the footprint center.
        let d = &spec.defects[0];
        let center = patch
            .iter()
            .cloned()
            .min_by(|&a, &b| {
                let dist = |i: usize| {
                    let p = pair.test.positions[i];
                    (p[0] - d.position).powi(2) + (p[1] - d.center_v).powi(2)
                };
                dist(a).partial_cmp(&dist(b)).unwrap()
            })
            .unwrap();
        assert!(pair.test.intensities[center] < base.test.intensities[center]);
    }

    #[test]
    fn extrados_crack_adds_no_points_and_keeps_intensity() {
        let mut spec = preset("arch_x_move").unwrap();
        spec.defects.retain(|d| d.kind == DefectKind::ExtradosCrack);
        let pair = generate(&spec).unwrap();
        assert_eq!(pair.reference.len(), pair.test.len());
        assert_eq!(pair.reference.intensities, pair.test.intensities);
        let labels = pair.test.labels.as_ref().unwrap();
        assert!(labels.iter().any(|&l| l == Label::ExtradosCrack));
        assert!(labels.iter().all(|&l| l != Label::InnerCrack));
        // Geometry does change across the crack line.
        assert_ne!(pair.reference.positions, pair.test.positions);
    }

    #[test]
    fn preset_water_only_has_one_patch_and_no_cracks() {
        let spec = preset("water_only").unwrap();
        assert_eq!(spec.defects.len(), 1);
        assert_eq!(spec.defects[0].kind, DefectKind::WaterPatch);
    }

    #[test]
    fn preset_arch_x_move_has_both_crack_kinds() {
        let spec = preset("arch_x_move").unwrap();
        assert!(spec.defects.iter().any(|d| d.kind == DefectKind::IntradosCrack));
        assert!(spec.defects.iter().any(|d| d.kind == DefectKind::ExtradosCrack));
    }

    #[test]
    fn every_preset_generates_with_expected_labels() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            let pair = generate(&spec).unwrap();
            assert!(pair.reference.labels.is_none());
            let labels = pair.test.labels.as_ref().unwrap();
            for d in &spec.defects {
                let expected = match d.kind {
                    DefectKind::IntradosCrack => Label::IntradosCrack,
                    DefectKind::ExtradosCrack => Label::ExtradosCrack,
                    DefectKind::WaterPatch => Label::WaterPatch,
                };
                assert!(
                    labels.iter().any(|&l| l == expected),
                    "preset {name}: no {expected:?} labels"
                );
                if d.kind == DefectKind::IntradosCrack {
                    assert!(labels.iter().any(|&l| l == Label::InnerCrack));
                }
            }
        }
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(preset("nope").is_err());
    }

    #[test]
    fn out_of_extent_defect_rejected() {
        let mut spec = preset("water_only").unwrap();
        spec.defects[0].position = 3.9; // footprint reaches past width 4.0
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn groove_points_lie_in_the_prism() {
        let mut spec = preset("arch_x_move").unwrap();
        // Keep only the groove: the hinge of the extrados defect would move
        // groove points far beyond the prism slack.
        spec.defects.retain(|d| d.kind == DefectKind::IntradosCrack);
        let pair = generate(&spec).unwrap();
        let labels = pair.test.labels.as_ref().unwrap();
        let d = spec
            .defects
            .iter()
            .find(|d| d.kind == DefectKind::IntradosCrack)
            .unwrap();
        let radius = match spec.surface {
            Surface::CylindricalArch { radius, .. } => radius,
            _ => unreachable!(),
        };
        for i in 0..pair.test.len() {
            if labels[i] != Label::InnerCrack {
                continue;
            }
            let p = pair.test.positions[i];
            // Groove walls extend into the material: radial distance in
            // (R, R + depth]; allow slack for the deformation field.
            let r = (p[0] * p[0] + p[2] * p[2]).sqrt();
            assert!(r > radius - 1e-9 && r <= radius + d.depth + 0.05, "r = {r}");
        }
    }
}
