use super::{object_color, palette, surface_color, ImageObservation};
use crate::arena::{
    geometry::heading_sin_cos, ArenaSpec, EpisodeState, ObjectKind, Opacity, Surface, Vec2,
    AGENT_RADIUS,
};

/// Orthographic overhead view. World `+z` points up in the image and `+x`
/// to the right; one unit maps to `pixels_per_unit` pixels.
pub struct TopDown {
    pub pixels_per_unit: f64,
}

impl Default for TopDown {
    fn default() -> Self {
        Self {
            pixels_per_unit: 8.0,
        }
    }
}

impl TopDown {
    pub fn image_size(&self, spec: &ArenaSpec) -> u32 {
        (spec.size * self.pixels_per_unit).round() as u32
    }

    /// Continuous pixel coordinates of a world point.
    pub fn project(&self, spec: &ArenaSpec, p: Vec2) -> (f64, f64) {
        let s = self.image_size(spec) as f64;
        (p.x * self.pixels_per_unit, s - p.z * self.pixels_per_unit)
    }

    fn unproject(&self, spec: &ArenaSpec, px: f64, py: f64) -> Vec2 {
        let s = self.image_size(spec) as f64;
        Vec2::new(px / self.pixels_per_unit, (s - py) / self.pixels_per_unit)
    }

    pub fn render(&self, state: &EpisodeState, spec: &ArenaSpec) -> ImageObservation {
        let n = self.image_size(spec);
        let ground = surface_color(spec, Surface::Ground, palette::GROUND);
        let mut pixels = Vec::with_capacity((n * n * 3) as usize);
        for y in 0..n {
            for x in 0..n {
                let p = self.unproject(spec, x as f64 + 0.5, y as f64 + 0.5);
                pixels.extend_from_slice(&[ground.0, ground.1, ground.2]);
                let i = pixels.len() - 3;
                let mut put = |c: crate::arena::Rgb| pixels[i..i + 3].copy_from_slice(&[c.0, c.1, c.2]);
                // Zones first, then solids by height, then spheres on top.
                let mut top = f64::NEG_INFINITY;
                for (obj, st) in spec.objects.iter().zip(&state.objects) {
                    if obj.kind.is_zone() && obj.footprint_at(st.position).contains(p) {
                        put(object_color(spec, obj.kind, None));
                    }
                }
                for (obj, st) in spec.objects.iter().zip(&state.objects) {
                    if obj.kind.is_zone() || obj.kind.is_sphere() {
                        continue;
                    }
                    let h = st.position.y + obj.extents().y;
                    if h >= top && obj.footprint_at(st.position).contains(p) {
                        top = h;
                        let c = object_color(spec, obj.kind, obj.color);
                        if obj.kind == ObjectKind::Wall(Opacity::Transparent) {
                            put(crate::arena::Rgb(
                                ((ground.0 as u16 + c.0 as u16) / 2) as u8,
                                ((ground.1 as u16 + c.1 as u16) / 2) as u8,
                                ((ground.2 as u16 + c.2 as u16) / 2) as u8,
                            ));
                        } else {
                            put(c);
                        }
                    }
                }
                for (obj, st) in spec.objects.iter().zip(&state.objects) {
                    if obj.kind.is_sphere()
                        && !st.collected
                        && (st.position.flat() - p).length() <= obj.diameter() / 2.0
                    {
                        put(object_color(spec, obj.kind, None));
                    }
                }
                let agent = state.agent_pos.flat();
                if (agent - p).length() <= AGENT_RADIUS.max(1.5 / self.pixels_per_unit) {
                    put(palette::AGENT);
                }
            }
        }
        let mut img = ImageObservation {
            width: n,
            height: n,
            pixels,
            step_rendered_at: state.step,
            blackout: false,
        };
        self.draw_arrow(&mut img, spec, state);
        img
    }

    fn draw_arrow(&self, img: &mut ImageObservation, spec: &ArenaSpec, state: &EpisodeState) {
        let (sin, cos) = heading_sin_cos(state.agent_heading as f64);
        let (x0, y0) = self.project(spec, state.agent_pos.flat());
        let len = (AGENT_RADIUS * 3.0 * self.pixels_per_unit).max(6.0);
        let steps = (len * 2.0).ceil() as usize;
        for k in 0..=steps {
            let t = len * k as f64 / steps as f64;
            let (x, y) = (x0 + sin * t, y0 - cos * t);
            if x >= 0.0 && y >= 0.0 && (x as u32) < img.width && (y as u32) < img.height {
                let i = 3 * ((y as u32) * img.width + x as u32) as usize;
                let c = palette::ARROW;
                img.pixels[i..i + 3].copy_from_slice(&[c.0, c.1, c.2]);
            }
        }
    }
}

/// Overhead view at the default scale.
pub fn render_topdown(state: &EpisodeState, spec: &ArenaSpec) -> ImageObservation {
    TopDown::default().render(state, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{load_arena, Arena, PhysicsConfig};

    fn setup(extra: &str) -> (ArenaSpec, EpisodeState) {
        let spec = load_arena(&format!(
            "arenaspec v1\nid: t\ntime_limit: 100\nagent_position: 20 0 20\nagent_heading: 0\n{extra}"
        ))
        .unwrap();
        let st = Arena::new(spec.clone(), PhysicsConfig::default()).initial_state(0);
        (spec, st)
    }

    fn is_arrow(img: &ImageObservation, x: u32, y: u32) -> bool {
        let c = palette::ARROW;
        img.pixel(x, y) == [c.0, c.1, c.2]
    }

    #[test]
    fn arrow_points_up_then_right() {
        let (spec, mut st) = setup("");
        let img = render_topdown(&st, &spec);
        assert_eq!(img.width, 320);
        assert_eq!(img.pixel(157, 160), [255, 0, 255]);
        assert!(is_arrow(&img, 160, 160));
        assert!(is_arrow(&img, 160, 150));
        assert!(!is_arrow(&img, 170, 160));
        st.agent_heading = 90;
        let img = render_topdown(&st, &spec);
        assert!(is_arrow(&img, 170, 160));
        assert!(!is_arrow(&img, 160, 150));
    }

    #[test]
    fn object_position_matches_projection() {
        let (spec, st) = setup("object: green_goal\n  position: 7 0 31\n  size: 1\n");
        let td = TopDown::default();
        let img = td.render(&st, &spec);
        let (px, py) = td.project(&spec, Vec2::new(7.0, 31.0));
        let g = palette::GREEN;
        let green: Vec<(u32, u32)> = (0..img.height)
            .flat_map(|y| (0..img.width).map(move |x| (x, y)))
            .filter(|(x, y)| img.pixel(*x, *y) == [g.0, g.1, g.2])
            .collect();
        let n = green.len() as f64;
        let cx = green.iter().map(|p| p.0 as f64 + 0.5).sum::<f64>() / n;
        let cy = green.iter().map(|p| p.1 as f64 + 0.5).sum::<f64>() / n;
        assert!((cx - px).abs() <= 1.0 && (cy - py).abs() <= 1.0);
    }
}
