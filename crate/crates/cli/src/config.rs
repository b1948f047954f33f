//! Text configuration files: `[section]` headers, `key = value` lines and `#`
//! comments. Scene, rig and reconstruction-parameter files share this syntax.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rfdepth_core::geometry::{PinholeDevice, Rig};
use rfdepth_core::io::read_pfm;
use rfdepth_core::reconstruct::{ReconstructionParams, SeedStrategy};
use rfdepth_core::{BrdfModel, Error, HeightField, Result, Scene};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    value_column: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, indent + trimmed.len(), "expected `]`"))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(parse_error(line, indent + 2, format!("bad section name `{name}`")));
            }
            if let Some(prev) = sections.iter().find(|s| s.name == name) {
                return Err(parse_error(
                    line,
                    indent + 1,
                    format!("duplicate section [{name}] (first on line {}, again on line {line})", prev.line),
                ));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let eq = content
            .find('=')
            .ok_or_else(|| parse_error(line, indent + 1, "expected `key = value` or `[section]`"))?;
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(parse_error(line, indent + 1, format!("bad key `{key}`")));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        if value.is_empty() {
            return Err(parse_error(line, eq + 2, format!("missing value for `{key}`")));
        }
        let value_column = eq + 2 + (after.len() - after.trim_start().len());
        let section = sections
            .last_mut()
            .ok_or_else(|| parse_error(line, indent + 1, "key outside of any [section]"))?;
        if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
            return Err(parse_error(
                line,
                indent + 1,
                format!("duplicate key `{key}` (first on line {}, again on line {line})", prev.line),
            ));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
            value_column,
        });
    }
    Ok(sections)
}

/// Typed access to one section, tracking which keys were consumed.
struct Reader<'a> {
    section: &'a Section,
    allowed: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(section: &'a Section, allowed: &[&'static str]) -> Result<Self> {
        for e in &section.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(parse_error(
                    e.line,
                    1,
                    format!("unknown key `{}` in [{}]", e.key, section.name),
                ));
            }
        }
        Ok(Reader {
            section,
            allowed: allowed.to_vec(),
        })
    }

    fn entry(&self, key: &str) -> Option<&'a Entry> {
        debug_assert!(self.allowed.contains(&key));
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn str(&self, key: &str) -> Option<&'a str> {
        self.entry(key).map(|e| e.value.trim_matches('"'))
    }

    fn required_entry(&self, key: &str) -> Result<&'a Entry> {
        self.entry(key).ok_or_else(|| {
            parse_error(
                self.section.line,
                1,
                format!("missing required key `{key}` in [{}]", self.section.name),
            )
        })
    }

    fn number_of(e: &Entry) -> Result<f64> {
        e.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_error(e.line, e.value_column, format!("`{}` expects a number, got `{}`", e.key, e.value)))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        Self::number_of(self.required_entry(key)?)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.entry(key).map_or(Ok(default), Self::number_of)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let e = self.required_entry(key)?;
        e.value
            .parse::<usize>()
            .map_err(|_| parse_error(e.line, e.value_column, format!("`{key}` expects a nonnegative integer, got `{}`", e.value)))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.entry(key) {
            Some(_) => self.usize(key),
            None => Ok(default),
        }
    }

    fn list(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let e = self.required_entry(key)?;
        let values: Vec<f64> = e
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| parse_error(e.line, e.value_column, format!("`{key}` expects {len} numbers")))?;
        if values.len() != len {
            return Err(parse_error(
                e.line,
                e.value_column,
                format!("`{key}` expects {len} numbers, got {}", values.len()),
            ));
        }
        Ok(values)
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(parse_error(e.line, e.value_column, format!("`{key}` expects true or false, got `{other}`"))),
            },
        }
    }
}

fn section<'a>(sections: &'a [Section], name: &str) -> Option<&'a Section> {
    sections.iter().find(|s| s.name == name)
}

fn required_section<'a>(sections: &'a [Section], name: &str) -> Result<&'a Section> {
    section(sections, name).ok_or_else(|| parse_error(1, 1, format!("missing [{name}] section")))
}

fn check_sections(sections: &[Section], allowed: &[&str]) -> Result<()> {
    for s in sections {
        if !allowed.contains(&s.name.as_str()) {
            return Err(parse_error(s.line, 2, format!("unknown section [{}]", s.name)));
        }
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Validation {
            key: key.to_string(),
            message: format!("must be positive, got {v}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Node counts along x and y.
    pub width: usize,
    pub height: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    /// Multiplier applied to every surface height.
    pub scale: f64,
    /// Transport integration samples per cell along each axis.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceConfig {
    Plane {
        slope_x: f64,
        slope_y: f64,
        offset: f64,
    },
    /// Cube rotated by `yaw` degrees about the vertical (y) axis, in front of
    /// a background plane at depth `background`.
    Cube {
        size: f64,
        center: [f64; 3],
        yaw_deg: f64,
        background: f64,
    },
    RuledSine {
        amplitude: f64,
        period: f64,
        offset: f64,
    },
    FromPfm(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub grid: GridConfig,
    pub surface: SurfaceConfig,
    pub brdf: BrdfModel,
    /// Tangent reference azimuth in degrees.
    pub frame_angle_deg: f64,
}

/// Parses a scene file. Relative PFM paths resolve against `base_dir`.
pub fn parse_scene(text: &str, base_dir: &Path) -> Result<SceneConfig> {
    let sections = tokenize(text)?;
    check_sections(&sections, &["grid", "surface", "brdf", "frame"])?;

    let g = Reader::new(
        required_section(&sections, "grid")?,
        &["width", "height", "dx", "dy", "origin_x", "origin_y", "scale", "samples"],
    )?;
    let grid = GridConfig {
        width: g.usize("width")?,
        height: g.usize("height")?,
        dx: g.f64("dx")?,
        dy: g.f64_or("dy", f64::NAN)?,
        origin_x: g.f64_or("origin_x", 0.0)?,
        origin_y: g.f64_or("origin_y", 0.0)?,
        scale: g.f64_or("scale", 1.0)?,
        samples: g.usize_or("samples", 4)?,
    };
    let grid = GridConfig {
        dy: if grid.dy.is_nan() { grid.dx } else { grid.dy },
        ..grid
    };
    if grid.width < 2 || grid.height < 2 {
        return Err(Error::Validation {
            key: if grid.width < 2 { "width" } else { "height" }.into(),
            message: "need at least 2 grid nodes".into(),
        });
    }
    positive("dx", grid.dx)?;
    positive("dy", grid.dy)?;
    positive("scale", grid.scale)?;
    if grid.samples == 0 {
        return Err(Error::Validation {
            key: "samples".into(),
            message: "must be at least 1".into(),
        });
    }

    let s_sec = required_section(&sections, "surface")?;
    let kind = Reader::new(s_sec, &["kind", "slope_x", "slope_y", "offset", "size", "center", "yaw", "background", "amplitude", "period", "path"])?;
    let kind_entry = kind.required_entry("kind")?;
    let surface = match kind.str("kind").unwrap() {
        "plane" => {
            let r = Reader::new(s_sec, &["kind", "slope_x", "slope_y", "offset"])?;
            SurfaceConfig::Plane {
                slope_x: r.f64_or("slope_x", 0.0)?,
                slope_y: r.f64_or("slope_y", 0.0)?,
                offset: r.f64("offset")?,
            }
        }
        "cube" => {
            let r = Reader::new(s_sec, &["kind", "size", "center", "yaw", "background"])?;
            let c = r.list("center", 3)?;
            let size = positive("size", r.f64("size")?)?;
            let background = r.f64_or("background", c[2] + size)?;
            SurfaceConfig::Cube {
                size,
                center: [c[0], c[1], c[2]],
                yaw_deg: r.f64_or("yaw", 45.0)?,
                background,
            }
        }
        "ruled_sine" => {
            let r = Reader::new(s_sec, &["kind", "amplitude", "period", "offset"])?;
            SurfaceConfig::RuledSine {
                amplitude: r.f64("amplitude")?,
                period: positive("period", r.f64("period")?)?,
                offset: r.f64("offset")?,
            }
        }
        "pfm" => {
            let r = Reader::new(s_sec, &["kind", "path"])?;
            let p = PathBuf::from(r.str("path").ok_or_else(|| {
                parse_error(s_sec.line, 1, "missing required key `path` in [surface]")
            })?);
            SurfaceConfig::FromPfm(if p.is_absolute() { p } else { base_dir.join(p) })
        }
        other => {
            return Err(parse_error(
                kind_entry.line,
                kind_entry.value_column,
                format!("unknown surface kind `{other}` (expected plane, cube, ruled_sine or pfm)"),
            ))
        }
    };

    let b_sec = required_section(&sections, "brdf")?;
    let m = Reader::new(b_sec, &["model", "albedo", "diffuse", "specular", "exponent", "alpha_x", "alpha_y"])?;
    let model_entry = m.required_entry("model")?;
    let brdf = match m.str("model").unwrap() {
        "lambertian" => {
            let r = Reader::new(b_sec, &["model", "albedo"])?;
            BrdfModel::lambertian(r.f64("albedo")?)?
        }
        "blinn_phong" => {
            let r = Reader::new(b_sec, &["model", "diffuse", "specular", "exponent"])?;
            BrdfModel::blinn_phong(r.f64("diffuse")?, r.f64("specular")?, r.f64("exponent")?)?
        }
        "ward" => {
            let r = Reader::new(b_sec, &["model", "diffuse", "specular", "alpha_x", "alpha_y"])?;
            BrdfModel::ward(r.f64("diffuse")?, r.f64("specular")?, r.f64("alpha_x")?, r.f64("alpha_y")?)?
        }
        other => {
            return Err(parse_error(
                model_entry.line,
                model_entry.value_column,
                format!("unknown brdf model `{other}` (expected lambertian, blinn_phong or ward)"),
            ))
        }
    };

    let frame_angle_deg = match section(&sections, "frame") {
        Some(f) => Reader::new(f, &["angle"])?.f64_or("angle", 0.0)?,
        None => 0.0,
    };

    Ok(SceneConfig {
        grid,
        surface,
        brdf,
        frame_angle_deg,
    })
}

/// Depth of the front face of a square (in the xz plane) rotated by `yaw`.
fn cube_front(x: f64, size: f64, cx: f64, cz: f64, yaw: f64) -> Option<f64> {
    let h = 0.5 * size;
    let (s, c) = yaw.sin_cos();
    let corners: Vec<(f64, f64)> = [(-h, -h), (h, -h), (h, h), (-h, h)]
        .iter()
        .map(|(a, b)| (cx + c * a + s * b, cz - s * a + c * b))
        .collect();
    let mut best: Option<f64> = None;
    for k in 0..4 {
        let (x0, z0) = corners[k];
        let (x1, z1) = corners[(k + 1) % 4];
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        if x < lo || x > hi || (x1 - x0).abs() < 1e-15 {
            continue;
        }
        let z = z0 + (z1 - z0) * (x - x0) / (x1 - x0);
        best = Some(best.map_or(z, |b: f64| b.min(z)));
    }
    best
}

impl SceneConfig {
    pub fn height_field(&self) -> Result<HeightField> {
        let g = &self.grid;
        let hf = match &self.surface {
            SurfaceConfig::FromPfm(path) => {
                let img = read_pfm(path)?;
                if img.width != g.width || img.height != g.height {
                    return Err(Error::DimensionMismatch {
                        what: "surface PFM size (width*height)",
                        expected: g.width * g.height,
                        got: img.width * img.height,
                    });
                }
                let z: Vec<f64> = img.data.iter().map(|v| *v as f64 * g.scale).collect();
                let valid = z.iter().map(|v| v.is_finite()).collect();
                HeightField::new(g.width, g.height, g.dx, g.dy, z, valid)?.with_origin(g.origin_x, g.origin_y)
            }
            surface => {
                let f = |x: f64, y: f64| -> f64 {
                    match *surface {
                        SurfaceConfig::Plane { slope_x, slope_y, offset } => slope_x * x + slope_y * y + offset,
                        SurfaceConfig::RuledSine { amplitude, period, offset } => {
                            offset + amplitude * (std::f64::consts::TAU * x / period).sin()
                        }
                        SurfaceConfig::Cube { size, center, yaw_deg, background } => {
                            if (y - center[1]).abs() <= 0.5 * size {
                                cube_front(x, size, center[0], center[2], yaw_deg.to_radians())
                                    .map_or(background, |z| z.min(background))
                            } else {
                                background
                            }
                        }
                        SurfaceConfig::FromPfm(_) => unreachable!(),
                    }
                };
                HeightField::from_fn(g.width, g.height, g.dx, g.dy, (g.origin_x, g.origin_y), |x, y| g.scale * f(x, y))?
            }
        };
        Ok(hf)
    }

    pub fn scene(&self) -> Result<Scene> {
        Ok(Scene::new(self.height_field()?, self.brdf)?
            .with_frame_angle(self.frame_angle_deg.to_radians())
            .with_samples(self.grid.samples, self.grid.samples)?)
    }
}

fn parse_device(sec: &Section) -> Result<PinholeDevice> {
    let r = Reader::new(sec, &["width", "height", "fx", "fy", "cx", "cy", "rotation", "translation"])?;
    let rot = match r.entry("rotation") {
        Some(_) => Matrix3::from_row_slice(&r.list("rotation", 9)?),
        None => Matrix3::identity(),
    };
    let t = r.list("translation", 3)?;
    PinholeDevice::new(
        r.usize("width")?,
        r.usize("height")?,
        r.f64("fx")?,
        r.f64("fy")?,
        r.f64("cx")?,
        r.f64("cy")?,
        rot,
        Vector3::new(t[0], t[1], t[2]),
    )
}

/// Parses a rig file with `[camera]` and `[projector]` sections. Poses map
/// world points into the device frame: `X_dev = rotation * X + translation`.
pub fn parse_rig(text: &str) -> Result<Rig> {
    let sections = tokenize(text)?;
    check_sections(&sections, &["camera", "projector"])?;
    Rig::new(
        parse_device(required_section(&sections, "camera")?)?,
        parse_device(required_section(&sections, "projector")?)?,
    )
}

fn fmt_num(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

fn write_device(out: &mut String, name: &str, d: &PinholeDevice) {
    let r = &d.rotation;
    let rot: Vec<String> = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| fmt_num(r[(i, j)]))
        .collect();
    let t: Vec<String> = d.translation.iter().map(|v| fmt_num(*v)).collect();
    out.push_str(&format!(
        "[{name}]\nwidth = {}\nheight = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nrotation = {}\ntranslation = {}\n",
        d.width,
        d.height,
        fmt_num(d.fx),
        fmt_num(d.fy),
        fmt_num(d.cx),
        fmt_num(d.cy),
        rot.join(" "),
        t.join(" ")
    ));
}

pub fn write_rig(rig: &Rig) -> String {
    let mut out = String::new();
    write_device(&mut out, "camera", &rig.camera);
    out.push('\n');
    write_device(&mut out, "projector", &rig.projector);
    out
}

/// Parses a `[reconstruct]` parameter file; absent keys keep their defaults.
pub fn parse_params(text: &str) -> Result<ReconstructionParams> {
    let sections = tokenize(text)?;
    check_sections(&sections, &["reconstruct"])?;
    let mut p = ReconstructionParams::default();
    if let Some(sec) = section(&sections, "reconstruct") {
        let r = Reader::new(sec, &["omega_x_epsilon", "transport_epsilon", "seed_strategy", "refine_seed"])?;
        p.omega_x_epsilon = r.f64_or("omega_x_epsilon", p.omega_x_epsilon)?;
        p.transport_epsilon = r.f64_or("transport_epsilon", p.transport_epsilon)?;
        if let Some(e) = r.entry("seed_strategy") {
            p.seed_strategy = match e.value.as_str() {
                "brightest" => SeedStrategy::BrightestCorrespondence,
                "first_valid" => SeedStrategy::FirstValid,
                other => {
                    return Err(parse_error(
                        e.line,
                        e.value_column,
                        format!("unknown seed_strategy `{other}` (expected brightest or first_valid)"),
                    ))
                }
            };
        }
        p.refine_seed = r.bool_or("refine_seed", p.refine_seed)?;
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANE: &str = "\
[grid]
width = 11
height = 9
dx = 0.5

[surface]
kind = plane
offset = 4.0

[brdf]
model = lambertian
albedo = 0.8
";

    #[test]
    fn minimal_plane_gets_defaults() {
        let c = parse_scene(PLANE, Path::new(".")).unwrap();
        assert_eq!(c.grid.dy, 0.5);
        assert_eq!(c.grid.scale, 1.0);
        assert_eq!(c.grid.samples, 4);
        assert_eq!((c.grid.origin_x, c.grid.origin_y), (0.0, 0.0));
        assert_eq!(c.frame_angle_deg, 0.0);
        assert_eq!(
            c.surface,
            SurfaceConfig::Plane {
                slope_x: 0.0,
                slope_y: 0.0,
                offset: 4.0
            }
        );
        let h = c.height_field().unwrap();
        assert!(h.depths().iter().all(|z| *z == 4.0));
    }

    #[test]
    fn negative_alpha_names_the_key() {
        let text = "[grid]\nwidth = 4\nheight = 4\ndx = 1\n[surface]\nkind = plane\noffset = 1\n[brdf]\nmodel = ward\ndiffuse = 0.2\nspecular = 0.3\nalpha_x = -1\nalpha_y = 0.4\n";
        match parse_scene(text, Path::new(".")) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "alpha_x"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let text = "[grid]\nwidth = 4\nwidth = 5\n";
        match parse_scene(text, Path::new(".")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("line 2") && message.contains("line 3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_numbers_are_located() {
        let text = PLANE.replace("albedo = 0.8", "albedo = 0.8\ncolour = red");
        assert!(matches!(parse_scene(&text, Path::new(".")), Err(Error::Parse { line: 13, .. })));
        let text = PLANE.replace("dx = 0.5", "dx = half");
        assert!(matches!(
            parse_scene(&text, Path::new(".")),
            Err(Error::Parse { line: 4, column: 6, .. })
        ));
        let text = PLANE.replace("offset = 4.0", "offset = 4.0\namplitude = 2");
        assert!(matches!(parse_scene(&text, Path::new(".")), Err(Error::Parse { line: 9, .. })));
    }

    #[test]
    fn rig_round_trip_is_value_exact() {
        let rot = rfdepth_core::geometry::look_at(
            &rfdepth_core::Point3::new(0.1, 0.2, -0.3),
            &rfdepth_core::Point3::new(1.0, 0.5, 5.0),
            &Vector3::y(),
        )
        .unwrap();
        let cam = PinholeDevice::looking(64, 48, (96.1, 95.7), (-16.0, 23.5), rot, rfdepth_core::Point3::new(0.1, 0.2, -0.3)).unwrap();
        let proj = PinholeDevice::looking(32, 48, (72.0, 95.7), (23.0, 23.5), Matrix3::identity(), rfdepth_core::Point3::new(1.5, 0.0, 0.0)).unwrap();
        let rig = Rig::new(cam, proj).unwrap();
        let text = write_rig(&rig);
        assert_eq!(parse_rig(&text).unwrap(), rig);
    }

    #[test]
    fn params_defaults_and_overrides() {
        assert_eq!(parse_params("").unwrap(), ReconstructionParams::default());
        let p = parse_params("[reconstruct]\nseed_strategy = first_valid\nrefine_seed = false\n").unwrap();
        assert_eq!(p.seed_strategy, SeedStrategy::FirstValid);
        assert!(!p.refine_seed);
        assert!(matches!(
            parse_params("[reconstruct]\ntransport_epsilon = 0\n"),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn cube_front_face_is_a_ridge() {
        let text = "[grid]\nwidth = 41\nheight = 41\ndx = 0.1\norigin_x = -2\norigin_y = -2\n[surface]\nkind = cube\nsize = 2\ncenter = 0 0 5\n[brdf]\nmodel = lambertian\nalbedo = 0.5\n";
        let c = parse_scene(text, Path::new(".")).unwrap();
        let h = c.height_field().unwrap();
        let ridge = 5.0 - 2f64.sqrt();
        assert!((h.get(20, 20).unwrap() - ridge).abs() < 1e-12);
        assert!((h.get(25, 20).unwrap() - (ridge + 0.5)).abs() < 1e-12);
        assert_eq!(h.get(20, 0).unwrap(), 7.0);
    }
}
