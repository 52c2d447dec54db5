//! Software renderer for agent observations.
//!
//! The first-person view is a column raycaster over the 2.5D world: every
//! column casts one horizontal ray, boxes contribute a front face plus the
//! visible top or underside, the floor is cast per pixel so zones show up as
//! coloured ground, and goal spheres are drawn as depth-tested discs. All
//! colours are flat; colour is the semantic channel.

mod image;
mod topdown;

pub use image::{decode_png, encode_png, ImageError, ImageObservation};
pub use topdown::{render_topdown, TopDown};

use serde::{Deserialize, Serialize};

use crate::arena::{
    solids, ArenaSpec, EpisodeState, Obb, ObjectKind, Opacity, Rgb, Surface, Vec2, Vec3,
    AGENT_RADIUS,
};

pub mod palette {
    use crate::arena::Rgb;

    pub const SKY: Rgb = Rgb(153, 204, 255);
    pub const GROUND: Rgb = Rgb(176, 148, 112);
    pub const FENCE: Rgb = Rgb(255, 255, 255);
    pub const WALL: Rgb = Rgb(128, 128, 128);
    pub const TUNNEL: Rgb = Rgb(160, 160, 160);
    pub const YELLOW: Rgb = Rgb(255, 215, 0);
    pub const GREEN: Rgb = Rgb(0, 200, 0);
    pub const RED: Rgb = Rgb(220, 0, 0);
    pub const DEATH_ZONE: Rgb = Rgb(200, 30, 30);
    pub const HOT_ZONE: Rgb = Rgb(255, 140, 0);
    pub const PLATFORM: Rgb = Rgb(40, 80, 220);
    pub const RAMP: Rgb = Rgb(150, 60, 200);
    pub const PUSHABLE: Rgb = Rgb(205, 205, 205);
    pub const GLASS: Rgb = Rgb(200, 230, 255);
    pub const AGENT: Rgb = Rgb(255, 0, 255);
    pub const ARROW: Rgb = Rgb(0, 0, 0);
}

pub const FENCE_HEIGHT: f64 = 1.5;
const FENCE_THICKNESS: f64 = 0.5;
const GLASS_ALPHA: f64 = 0.35;
const NEAR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    /// Eye elevation above the agent's feet.
    pub eye_height: f64,
    pub horizontal_fov: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("invalid camera: {0}")]
pub struct CameraError(pub String);

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            eye_height: AGENT_RADIUS,
            horizontal_fov: 60.0,
            width: 512,
            height: 512,
        }
    }
}

impl CameraModel {
    pub fn with_resolution(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if self.width < 16 || self.height < 16 {
            return Err(CameraError("resolution must be at least 16x16".into()));
        }
        if !(self.horizontal_fov > 20.0 && self.horizontal_fov < 120.0) {
            return Err(CameraError("field of view must be in (20, 120) degrees".into()));
        }
        if !(self.eye_height.is_finite() && self.eye_height > 0.0) {
            return Err(CameraError("eye height must be positive".into()));
        }
        Ok(())
    }

    /// Pixels per unit of lateral offset at unit depth.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.horizontal_fov.to_radians() / 2.0).tan()
    }

    /// Screen column of a point at the given bearing (degrees, positive
    /// right) relative to the view direction.
    pub fn column_for_bearing(&self, bearing_deg: f64) -> f64 {
        self.width as f64 / 2.0 + bearing_deg.to_radians().tan() * self.focal()
    }
}

fn surface_color(spec: &ArenaSpec, surface: Surface, default: Rgb) -> Rgb {
    spec.palette_override(surface).unwrap_or(default)
}

pub(crate) fn object_color(spec: &ArenaSpec, kind: ObjectKind, custom: Option<Rgb>) -> Rgb {
    match kind {
        ObjectKind::YellowGoal => palette::YELLOW,
        ObjectKind::GreenGoal => palette::GREEN,
        ObjectKind::RedGoal => palette::RED,
        ObjectKind::DeathZone => palette::DEATH_ZONE,
        ObjectKind::HotZone => palette::HOT_ZONE,
        ObjectKind::Wall(Opacity::Opaque) => {
            custom.unwrap_or_else(|| surface_color(spec, Surface::Wall, palette::WALL))
        }
        ObjectKind::Wall(Opacity::Transparent) => palette::GLASS,
        ObjectKind::Ramp => palette::RAMP,
        ObjectKind::Platform => palette::PLATFORM,
        ObjectKind::PushableBlock => palette::PUSHABLE,
        ObjectKind::Tunnel => custom.unwrap_or(palette::TUNNEL),
    }
}

/// Geometry as seen by the renderer.
struct Slab {
    footprint: Obb,
    bottom: f64,
    /// Top height at the `-z` and `+z` ends of the footprint (equal for boxes).
    top_near: f64,
    top_far: f64,
    color: Rgb,
}

impl Slab {
    fn top_at(&self, p: Vec2) -> f64 {
        let l = self.footprint.to_local(p);
        let frac = ((l.z + self.footprint.half_z) / (2.0 * self.footprint.half_z)).clamp(0.0, 1.0);
        self.top_near + (self.top_far - self.top_near) * frac
    }
}

fn fence_slabs(spec: &ArenaSpec) -> Vec<Slab> {
    let s = spec.size;
    let t = FENCE_THICKNESS;
    let color = surface_color(spec, Surface::Fence, palette::FENCE);
    let mk = |cx: f64, cz: f64, hx: f64, hz: f64| Slab {
        footprint: Obb::new(Vec2::new(cx, cz), hx, hz, 0.0),
        bottom: 0.0,
        top_near: FENCE_HEIGHT,
        top_far: FENCE_HEIGHT,
        color,
    };
    vec![
        mk(s / 2.0, -t / 2.0, s / 2.0 + t, t / 2.0),
        mk(s / 2.0, s + t / 2.0, s / 2.0 + t, t / 2.0),
        mk(-t / 2.0, s / 2.0, t / 2.0, s / 2.0 + t),
        mk(s + t / 2.0, s / 2.0, t / 2.0, s / 2.0 + t),
    ]
}

fn scene_slabs(state: &EpisodeState, spec: &ArenaSpec) -> (Vec<Slab>, Vec<Slab>) {
    let mut opaque = fence_slabs(spec);
    let mut glass = Vec::new();
    for s in solids(spec, &state.objects) {
        let obj = &spec.objects[s.object.expect("object solids carry an index")];
        let color = object_color(spec, obj.kind, obj.color);
        let (top_near, top_far) = if s.is_ramp() {
            (s.bottom, s.top)
        } else {
            (s.top, s.top)
        };
        let slab = Slab {
            footprint: s.footprint,
            bottom: s.bottom,
            top_near,
            top_far,
            color,
        };
        if obj.kind == ObjectKind::Wall(Opacity::Transparent) {
            glass.push(slab);
        } else {
            opaque.push(slab);
        }
    }
    (opaque, glass)
}

struct Frame {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
    depth: Vec<f64>,
}

impl Frame {
    fn put(&mut self, x: usize, y: usize, depth: f64, c: Rgb) {
        let i = y * self.w + x;
        if depth < self.depth[i] {
            self.depth[i] = depth;
            self.rgb[3 * i..3 * i + 3].copy_from_slice(&[c.0, c.1, c.2]);
        }
    }

    fn blend(&mut self, x: usize, y: usize, depth: f64, c: Rgb, alpha: f64) {
        let i = y * self.w + x;
        if depth < self.depth[i] {
            for (k, v) in [c.0, c.1, c.2].into_iter().enumerate() {
                let old = self.rgb[3 * i + k] as f64;
                self.rgb[3 * i + k] = (old * (1.0 - alpha) + v as f64 * alpha).round() as u8;
            }
        }
    }
}

/// View parameters shared by all passes.
struct View {
    eye: Vec2,
    eye_y: f64,
    forward: Vec2,
    right: Vec2,
    focal: f64,
    half_w: f64,
    half_h: f64,
}

impl View {
    /// Screen row (continuous) of height `y` at perpendicular depth `perp`.
    fn row(&self, y: f64, perp: f64) -> f64 {
        self.half_h - (y - self.eye_y) * self.focal / perp
    }

    /// `k` such that the ray through row `r` drops `k` units per unit depth.
    fn slope(&self, r: usize) -> f64 {
        (r as f64 + 0.5 - self.half_h) / self.focal
    }
}

fn row_range(a: f64, b: f64, h: usize) -> std::ops::Range<usize> {
    let lo = a.min(b).floor().max(0.0);
    let hi = a.max(b).ceil().min(h as f64);
    if hi <= lo {
        0..0
    } else {
        lo as usize..hi as usize
    }
}

/// Renders the agent's first-person colour observation.
pub fn render(state: &EpisodeState, spec: &ArenaSpec, cam: &CameraModel) -> ImageObservation {
    let (w, h) = (cam.width as usize, cam.height as usize);
    if spec.is_blackout(state.step) {
        return ImageObservation::black(cam.width, cam.height, state.step);
    }
    let heading = state.agent_heading as f64;
    let view = View {
        eye: state.agent_pos.flat(),
        eye_y: state.agent_pos.y + cam.eye_height,
        forward: Vec2::from_heading(heading),
        right: Vec2::right_of_heading(heading),
        focal: cam.focal(),
        half_w: w as f64 / 2.0,
        half_h: h as f64 / 2.0,
    };
    let mut frame = Frame {
        w,
        h,
        rgb: vec![0; w * h * 3],
        depth: vec![f64::INFINITY; w * h],
    };

    draw_sky_and_ground(&mut frame, &view, state, spec);
    let (opaque, glass) = scene_slabs(state, spec);
    for x in 0..w {
        let s = (x as f64 + 0.5 - view.half_w) / view.focal;
        let dir_raw = view.forward + view.right * s;
        let cos = 1.0 / dir_raw.length();
        let dir = dir_raw * cos;
        for slab in &opaque {
            draw_slab_column(&mut frame, &view, slab, x, dir, cos);
        }
    }
    draw_spheres(&mut frame, &view, state, spec);
    for x in 0..w {
        let s = (x as f64 + 0.5 - view.half_w) / view.focal;
        let dir_raw = view.forward + view.right * s;
        let cos = 1.0 / dir_raw.length();
        let dir = dir_raw * cos;
        for slab in &glass {
            draw_glass_column(&mut frame, &view, slab, x, dir, cos);
        }
    }
    ImageObservation {
        width: cam.width,
        height: cam.height,
        pixels: frame.rgb,
        step_rendered_at: state.step,
        blackout: false,
    }
}

fn draw_sky_and_ground(frame: &mut Frame, view: &View, state: &EpisodeState, spec: &ArenaSpec) {
    let sky = surface_color(spec, Surface::Sky, palette::SKY);
    let ground = surface_color(spec, Surface::Ground, palette::GROUND);
    let zones: Vec<(Obb, Rgb)> = spec
        .objects
        .iter()
        .zip(&state.objects)
        .filter(|(o, _)| o.kind.is_zone())
        .map(|(o, st)| (o.footprint_at(st.position), object_color(spec, o.kind, None)))
        .collect();
    for y in 0..frame.h {
        let k = view.slope(y);
        for x in 0..frame.w {
            let i = y * frame.w + x;
            let (c, depth) = if k <= 0.0 {
                (sky, f64::INFINITY)
            } else {
                let perp = view.eye_y / k;
                let s = (x as f64 + 0.5 - view.half_w) / view.focal;
                let p = view.eye + view.forward * perp + view.right * (s * perp);
                // Later zones paint over earlier ones, matching the file order.
                let c = zones
                    .iter()
                    .rev()
                    .find(|(fp, _)| fp.contains(p))
                    .map(|(_, c)| *c)
                    .unwrap_or(ground);
                (c, perp)
            };
            frame.depth[i] = depth;
            frame.rgb[3 * i..3 * i + 3].copy_from_slice(&[c.0, c.1, c.2]);
        }
    }
}

fn draw_slab_column(frame: &mut Frame, view: &View, slab: &Slab, x: usize, dir: Vec2, cos: f64) {
    let Some((t0, t1)) = slab.footprint.ray_interval(view.eye, dir) else {
        return;
    };
    let ta = t0.max(NEAR);
    if t1 <= ta {
        return;
    }
    let p_a = view.eye + dir * ta;
    let p_b = view.eye + dir * t1;
    let (top_a, top_b) = (slab.top_at(p_a), slab.top_at(p_b));
    let (perp_a, perp_b) = (ta * cos, t1 * cos);

    // Front face.
    if t0 > NEAR {
        for y in row_range(view.row(top_a, perp_a), view.row(slab.bottom, perp_a), frame.h) {
            frame.put(x, y, perp_a, slab.color);
        }
    }

    // Upper surface, seen from above. Height along the ray is linear in t.
    let grad = (top_b - top_a) / (t1 - ta);
    let rows = if t0 > NEAR {
        row_range(view.row(top_a, perp_a), view.row(top_b, perp_b), frame.h)
    } else {
        row_range(view.half_h, view.row(top_b, perp_b), frame.h)
    };
    for y in rows {
        let kc = view.slope(y) * cos;
        let denom = kc + grad;
        if denom <= 0.0 {
            continue;
        }
        let t = (view.eye_y - top_a + grad * ta) / denom;
        if t >= ta && t <= t1 {
            frame.put(x, y, t * cos, slab.color);
        }
    }

    // Underside, seen from below.
    if slab.bottom > view.eye_y {
        let rows = if t0 > NEAR {
            row_range(view.row(slab.bottom, perp_a), view.row(slab.bottom, perp_b), frame.h)
        } else {
            row_range(0.0, view.row(slab.bottom, perp_b), frame.h)
        };
        for y in rows {
            let kc = view.slope(y) * cos;
            if kc >= 0.0 {
                continue;
            }
            let t = (view.eye_y - slab.bottom) / kc;
            if t >= ta && t <= t1 {
                frame.put(x, y, t * cos, slab.color);
            }
        }
    }
}

fn draw_glass_column(frame: &mut Frame, view: &View, slab: &Slab, x: usize, dir: Vec2, cos: f64) {
    let Some((t0, _)) = slab.footprint.ray_interval(view.eye, dir) else {
        return;
    };
    if t0 <= NEAR {
        return;
    }
    let perp = t0 * cos;
    for y in row_range(view.row(slab.top_near, perp), view.row(slab.bottom, perp), frame.h) {
        frame.blend(x, y, perp, slab.color, GLASS_ALPHA);
    }
}

fn draw_spheres(frame: &mut Frame, view: &View, state: &EpisodeState, spec: &ArenaSpec) {
    for (obj, st) in spec.objects.iter().zip(&state.objects) {
        if !obj.kind.is_sphere() || st.collected {
            continue;
        }
        let r = obj.diameter() / 2.0;
        let center = st.position + Vec3::new(0.0, r, 0.0);
        let rel = center.flat() - view.eye;
        let depth = rel.dot(view.forward);
        if depth <= NEAR + r * 0.5 {
            continue;
        }
        let cx = view.half_w + rel.dot(view.right) / depth * view.focal;
        let cy = view.half_h - (center.y - view.eye_y) / depth * view.focal;
        let rp = r / depth * view.focal;
        let color = object_color(spec, obj.kind, None);
        for y in row_range(cy - rp, cy + rp, frame.h) {
            for x in row_range(cx - rp, cx + rp, frame.w) {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                let q = (dx * dx + dy * dy) / (rp * rp);
                if q <= 1.0 {
                    frame.put(x, y, depth - r * (1.0 - q).sqrt(), color);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{load_arena, Arena, PhysicsConfig};

    fn arena(objects: &str, agent: &str) -> (ArenaSpec, EpisodeState) {
        let text = format!(
            "arenaspec v1\nid: t\ntime_limit: 100\nagent_position: {agent}\nagent_heading: 0\n{objects}"
        );
        let spec = load_arena(&text).unwrap();
        let state = Arena::new(spec.clone(), PhysicsConfig::default()).initial_state(0);
        (spec, state)
    }

    fn px(img: &ImageObservation, x: u32, y: u32) -> Rgb {
        let i = 3 * (y * img.width + x) as usize;
        Rgb(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2])
    }

    #[test]
    fn empty_arena_bands() {
        let (spec, state) = arena("", "20 0 20");
        let cam = CameraModel::with_resolution(64, 64);
        let img = render(&state, &spec, &cam);
        assert_eq!(px(&img, 32, 0), palette::SKY);
        assert_eq!(px(&img, 32, 63), palette::GROUND);
        assert_eq!(px(&img, 32, 31), palette::FENCE);
        assert_eq!(px(&img, 32, 32), palette::FENCE);
        for x in 0..64 {
            assert_eq!(px(&img, x, 32), palette::FENCE, "column {x}");
        }
    }

    #[test]
    fn goal_ahead_is_centered() {
        let (spec, state) = arena("object: green_goal\n  position: 20 0 14\n  size: 1\n", "20 0 4");
        let cam = CameraModel::with_resolution(64, 64);
        let img = render(&state, &spec, &cam);
        let cols: Vec<u32> = (0..64)
            .filter(|x| (0..64).any(|y| px(&img, *x, y) == palette::GREEN))
            .collect();
        assert!(!cols.is_empty());
        let mid = (cols[0] + cols[cols.len() - 1]) as f64 / 2.0 + 0.5;
        assert!((mid - 32.0).abs() <= 1.0, "disc centred at {mid}");
    }

    #[test]
    fn blackout_is_black() {
        let (spec, mut state) = arena("blackout: 5 10\n", "20 0 20");
        let cam = CameraModel::with_resolution(32, 32);
        state.step = 5;
        let img = render(&state, &spec, &cam);
        assert!(img.blackout);
        assert!(img.pixels.iter().all(|v| *v == 0));
        state.step = 10;
        assert!(!render(&state, &spec, &cam).blackout);
    }

    #[test]
    fn wall_occludes_goal() {
        let objs = "object: wall\n  position: 20 0 10\n  size: 10 3 1\n\nobject: green_goal\n  position: 20 0 16\n  size: 1\n";
        let (spec, state) = arena(objs, "20 0 4");
        let img = render(&state, &spec, &CameraModel::with_resolution(64, 64));
        assert!(!img.pixels.chunks(3).any(|c| Rgb(c[0], c[1], c[2]) == palette::GREEN));
        assert!(img.pixels.chunks(3).any(|c| Rgb(c[0], c[1], c[2]) == palette::WALL));
    }

    #[test]
    fn glass_does_not_occlude() {
        let objs = "object: transparent_wall\n  position: 20 0 10\n  size: 10 3 1\n\nobject: green_goal\n  position: 20 0 16\n  size: 1\n";
        let (spec, state) = arena(objs, "20 0 4");
        let img = render(&state, &spec, &CameraModel::with_resolution(64, 64));
        let tinted = img.pixels.chunks(3).any(|c| c[1] > 150 && c[0] > 50 && c[0] < 150);
        assert!(tinted, "tinted green visible through glass");
    }

    #[test]
    fn bearing_calibration() {
        let cam = CameraModel::with_resolution(64, 64);
        assert!((cam.column_for_bearing(30.0) - 64.0 * (0.5 + 30.0 / 60.0)).abs() <= 2.0);
        assert!((cam.column_for_bearing(0.0) - 32.0).abs() < 1e-9);
        // Sphere at +30 degrees shows up in the right half only.
        let (spec, state) = arena(
            "object: green_goal\n  position: 25.196152422706632 0 13\n  size: 2\n",
            "20 0 4",
        );
        let img = render(&state, &spec, &cam);
        let cols: Vec<u32> = (0..64)
            .filter(|x| (0..64).any(|y| px(&img, *x, y) == palette::GREEN))
            .collect();
        assert!(!cols.is_empty() && cols.iter().all(|c| *c >= 32));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::default().validate().is_ok());
        assert!(CameraModel::with_resolution(8, 64).validate().is_err());
        let wide = CameraModel {
            horizontal_fov: 150.0,
            ..CameraModel::default()
        };
        assert!(wide.validate().is_err());
    }
}
