//! Overhead images: binary PPM rasters and SVG.
//!
//! Free space is white, obstacles black. Controllers keep fixed colors:
//! MPPI red, CU-MPPI green, log-MPPI pink, CU-LogMPPI cyan.

use std::fmt::Write as _;
use std::io::Write;

use crate::control::Method;
use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::sampling::TrajectoryBatch;
use crate::world::World;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const BLACK: Rgb = Rgb(0, 0, 0);
    /// Obstacles not yet seen by the planner.
    pub const HIDDEN: Rgb = Rgb(150, 150, 150);
    pub const GOAL: Rgb = Rgb(255, 170, 0);
    pub const FAN: Rgb = Rgb(40, 80, 200);

    fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

pub fn method_color(m: Method) -> Rgb {
    match m {
        Method::Mppi => Rgb(220, 30, 30),
        Method::CuMppi => Rgb(30, 160, 60),
        Method::LogMppi => Rgb(240, 120, 180),
        Method::CuLogMppi => Rgb(0, 190, 210),
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Disc {
        x: f64,
        y: f64,
        r: f64,
        color: Rgb,
    },
    Rect {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        color: Rgb,
    },
    Path {
        points: Vec<(f64, f64)>,
        color: Rgb,
    },
}

/// Shapes in world coordinates, drawn in insertion order.
#[derive(Clone, Debug)]
pub struct Scene {
    pub min: (f64, f64),
    pub max: (f64, f64),
    shapes: Vec<Shape>,
}

impl Scene {
    pub fn new(min: (f64, f64), max: (f64, f64)) -> Self {
        Scene {
            min,
            max,
            shapes: Vec::new(),
        }
    }

    /// Extent of the world bounds, grid, obstacles, start and goal, padded
    /// by one meter.
    pub fn for_world(world: &World, revealed: Option<&[bool]>) -> Self {
        let mut pts = vec![
            (world.start.x, world.start.y),
            (world.config.goal.x, world.config.goal.y),
        ];
        if let Some(b) = world.bounds {
            pts.extend([b.min, b.max]);
        }
        let mut scene = Scene::around(&pts, 1.0);
        for o in &world.obstacles {
            scene.expand((o.center.0 - o.radius, o.center.1 - o.radius), 0.5);
            scene.expand((o.center.0 + o.radius, o.center.1 + o.radius), 0.5);
        }
        if let Some(g) = &world.grid {
            for iy in 0..g.height {
                for ix in 0..g.width {
                    if g.get(ix, iy) {
                        let (cx, cy) = g.cell_center(ix, iy);
                        let h = 0.5 * g.resolution;
                        scene.expand((cx - h, cy - h), 0.0);
                        scene.expand((cx + h, cy + h), 0.0);
                        scene.rect(cx - h, cy - h, g.resolution, g.resolution, Rgb::BLACK);
                    }
                }
            }
        }
        for (i, o) in world.obstacles.iter().enumerate() {
            let seen = o.revealed || revealed.is_none_or(|r| r.get(i).copied().unwrap_or(false));
            let color = if seen { Rgb::BLACK } else { Rgb::HIDDEN };
            scene.disc(o.center.0, o.center.1, o.radius, color);
        }
        let g = world.config.goal;
        scene.disc(g.x, g.y, world.config.goal_radius, Rgb::GOAL);
        scene
    }

    /// Bounding box of `pts` padded by `pad`.
    pub fn around(pts: &[(f64, f64)], pad: f64) -> Self {
        let mut s = Scene::new(
            (f64::INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for &p in pts {
            s.expand(p, pad);
        }
        if !s.min.0.is_finite() {
            s.min = (-pad, -pad);
            s.max = (pad, pad);
        }
        s
    }

    fn expand(&mut self, p: (f64, f64), pad: f64) {
        self.min = (self.min.0.min(p.0 - pad), self.min.1.min(p.1 - pad));
        self.max = (self.max.0.max(p.0 + pad), self.max.1.max(p.1 + pad));
    }

    pub fn disc(&mut self, x: f64, y: f64, r: f64, color: Rgb) -> &mut Self {
        self.shapes.push(Shape::Disc { x, y, r, color });
        self
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, color: Rgb) -> &mut Self {
        self.shapes.push(Shape::Rect { x, y, w, h, color });
        self
    }

    pub fn path(&mut self, points: Vec<(f64, f64)>, color: Rgb) -> &mut Self {
        self.shapes.push(Shape::Path { points, color });
        self
    }

    pub fn trajectory(&mut self, t: &Trajectory, color: Rgb) -> &mut Self {
        self.path(t.states.iter().map(|s| (s.x, s.y)).collect(), color)
    }

    pub fn fan(&mut self, batch: &TrajectoryBatch, color: Rgb) -> &mut Self {
        for t in &batch.trajectories {
            self.trajectory(t, color);
        }
        self
    }

    fn pixels(&self, px_per_m: f64) -> (usize, usize) {
        let w = ((self.max.0 - self.min.0) * px_per_m).ceil().max(1.0) as usize;
        let h = ((self.max.1 - self.min.1) * px_per_m).ceil().max(1.0) as usize;
        (w, h)
    }

    /// Row-major RGB raster, top row first.
    pub fn rasterize(&self, px_per_m: f64) -> (usize, usize, Vec<Rgb>) {
        let (w, h) = self.pixels(px_per_m);
        let mut img = vec![Rgb::WHITE; w * h];
        let to_px = |x: f64, y: f64| ((x - self.min.0) * px_per_m, (self.max.1 - y) * px_per_m);
        let mut put = |px: i64, py: i64, c: Rgb| {
            if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                img[py as usize * w + px as usize] = c;
            }
        };
        for shape in &self.shapes {
            match shape {
                Shape::Disc { x, y, r, color } => {
                    let (cx, cy) = to_px(*x, *y);
                    let rp = (r * px_per_m).max(0.5);
                    for py in (cy - rp).floor() as i64..=(cy + rp).ceil() as i64 {
                        for px in (cx - rp).floor() as i64..=(cx + rp).ceil() as i64 {
                            let (dx, dy) = (px as f64 + 0.5 - cx, py as f64 + 0.5 - cy);
                            if dx * dx + dy * dy <= rp * rp {
                                put(px, py, *color);
                            }
                        }
                    }
                }
                Shape::Rect {
                    x,
                    y,
                    w: rw,
                    h: rh,
                    color,
                } => {
                    let (x0, y1) = to_px(*x, *y);
                    let (x1, y0) = to_px(x + rw, y + rh);
                    for py in y0.floor() as i64..y1.ceil() as i64 {
                        for px in x0.floor() as i64..x1.ceil() as i64 {
                            put(px, py, *color);
                        }
                    }
                }
                Shape::Path { points, color } => {
                    for seg in points.windows(2) {
                        let (ax, ay) = to_px(seg[0].0, seg[0].1);
                        let (bx, by) = to_px(seg[1].0, seg[1].1);
                        let n = (bx - ax).abs().max((by - ay).abs()).ceil().max(1.0) as usize;
                        for i in 0..=n {
                            let f = i as f64 / n as f64;
                            put(
                                (ax + f * (bx - ax)).floor() as i64,
                                (ay + f * (by - ay)).floor() as i64,
                                *color,
                            );
                        }
                    }
                }
            }
        }
        (w, h, img)
    }

    pub fn write_ppm<W: Write>(&self, px_per_m: f64, mut out: W) -> Result<()> {
        let (w, h, img) = self.rasterize(px_per_m);
        write!(out, "P6\n{w} {h}\n255\n")?;
        let bytes: Vec<u8> = img.iter().flat_map(|c| [c.0, c.1, c.2]).collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn to_svg(&self, px_per_m: f64) -> String {
        let (w, h) = self.pixels(px_per_m);
        let tx = |x: f64| (x - self.min.0) * px_per_m;
        let ty = |y: f64| (self.max.1 - y) * px_per_m;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        for shape in &self.shapes {
            match shape {
                Shape::Disc { x, y, r, color } => {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
                        tx(*x),
                        ty(*y),
                        r * px_per_m,
                        color.hex()
                    );
                }
                Shape::Rect {
                    x,
                    y,
                    w: rw,
                    h: rh,
                    color,
                } => {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        tx(*x),
                        ty(y + rh),
                        rw * px_per_m,
                        rh * px_per_m,
                        color.hex()
                    );
                }
                Shape::Path { points, color } => {
                    let pts: Vec<String> = points
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", tx(x), ty(y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
                        pts.join(" "),
                        color.hex()
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::State;
    use crate::world::{Obstacle, WorldConfig};

    #[test]
    fn ppm_header_and_size() {
        let mut scene = Scene::new((0.0, 0.0), (2.0, 1.0));
        scene.disc(1.0, 0.5, 0.25, Rgb::BLACK);
        let mut out = Vec::new();
        scene.write_ppm(10.0, &mut out).unwrap();
        let header = b"P6\n20 10\n255\n";
        assert_eq!(&out[..header.len()], header);
        assert_eq!(out.len(), header.len() + 20 * 10 * 3);
    }

    #[test]
    fn disc_pixels_follow_point_in_circle() {
        let mut scene = Scene::new((0.0, 0.0), (2.0, 2.0));
        scene.disc(1.0, 1.0, 0.5, Rgb::BLACK);
        let (w, h, img) = scene.rasterize(20.0);
        for py in 0..h {
            for px in 0..w {
                let x = (px as f64 + 0.5) / 20.0;
                let y = 2.0 - (py as f64 + 0.5) / 20.0;
                let inside = (x - 1.0).hypot(y - 1.0) <= 0.5;
                assert_eq!(img[py * w + px] == Rgb::BLACK, inside, "pixel {px},{py}");
            }
        }
    }

    #[test]
    fn world_scene_marks_hidden_obstacles() {
        let w = World::open(State::origin(), WorldConfig::default())
            .unwrap()
            .with_obstacles(vec![Obstacle::new(1.5, 0.0, 0.5)])
            .unwrap();
        let hidden = Scene::for_world(&w, Some(&[false])).to_svg(10.0);
        assert!(hidden.contains("#969696"));
        let seen = Scene::for_world(&w, Some(&[true])).to_svg(10.0);
        assert!(seen.contains(r##"fill="#000000""##));
        assert!(seen.starts_with("<svg"));
    }

    #[test]
    fn palette_is_distinct() {
        let c: Vec<Rgb> = Method::ALL.iter().map(|&m| method_color(m)).collect();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                assert_ne!(c[i], c[j]);
            }
        }
        assert_eq!(method_color(Method::Mppi), Rgb(220, 30, 30));
    }
}
