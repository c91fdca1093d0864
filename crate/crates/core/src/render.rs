//! Escape-time pictures of the dynamical plane as binary PPM.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, IterateOptions, MeromorphicMap, Terminal};
use crate::error::{NevlabError, Result};
use crate::sphere::SpherePoint;

pub const MAX_SIDE: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderWindow {
    pub center: Complex64,
    /// Width of the window in the plane; pixels are square.
    pub width: f64,
    pub pixels_x: usize,
    pub pixels_y: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_escape_radius")]
    pub escape_radius: f64,
}

fn default_n_max() -> usize {
    256
}

fn default_escape_radius() -> f64 {
    1e8
}

impl RenderWindow {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NevlabError::InvalidArgument(m));
        if !(self.width > 0.0 && self.width.is_finite()) {
            return bad(format!("window width {} must be positive", self.width));
        }
        if !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return bad(format!("window center {} is not finite", self.center));
        }
        if self.pixels_x == 0 || self.pixels_y == 0 || self.pixels_x > MAX_SIDE || self.pixels_y > MAX_SIDE {
            return bad(format!("pixel dims {}x{} outside 1..={MAX_SIDE}", self.pixels_x, self.pixels_y));
        }
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        if !(self.escape_radius > 0.0) {
            return bad(format!("escape radius {} must be positive", self.escape_radius));
        }
        Ok(())
    }

    /// Centre of pixel `(col, row)`, row 0 at the top.
    pub fn pixel(&self, col: usize, row: usize) -> Complex64 {
        let s = self.width / self.pixels_x as f64;
        let x = (col as f64 + 0.5 - self.pixels_x as f64 / 2.0) * s;
        let y = (row as f64 + 0.5 - self.pixels_y as f64 / 2.0) * s;
        self.center + Complex64::new(x, -y)
    }
}

/// How a pixel's orbit ended and after how many steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelFate {
    pub terminal: Terminal,
    pub steps: usize,
}

pub fn pixel_fate<F: MeromorphicMap + ?Sized>(f: &F, z0: Complex64, win: &RenderWindow) -> Result<PixelFate> {
    let opts = IterateOptions { n_max: win.n_max, escape_radius: win.escape_radius, ..IterateOptions::default() };
    let mut z = z0;
    let mut outside = 0;
    for k in 1..=win.n_max {
        match step(f, z, &opts)? {
            SpherePoint::Infinity => return Ok(PixelFate { terminal: Terminal::ReachedInfinity, steps: k }),
            SpherePoint::Finite(w) => {
                z = w;
                if w.norm() > opts.escape_radius {
                    outside += 1;
                    if outside >= opts.persistence {
                        return Ok(PixelFate { terminal: Terminal::EscapedRadius, steps: k });
                    }
                } else {
                    outside = 0;
                }
            }
        }
    }
    Ok(PixelFate { terminal: Terminal::MaxIterations, steps: win.n_max })
}

/// Pole hits in reds, radius escapes in blues, bright when early.
/// Orbits still running at `n_max` are black.
pub fn color(fate: PixelFate, n_max: usize) -> [u8; 3] {
    let v = 1.0 - (1.0 + fate.steps as f64).ln() / (2.0 + n_max as f64).ln();
    let c = |x: f64| (x * v).round().clamp(0.0, 255.0) as u8;
    match fate.terminal {
        Terminal::ReachedInfinity => [c(255.0), c(96.0), c(32.0)],
        Terminal::EscapedRadius => [c(32.0), c(128.0), c(255.0)],
        Terminal::MaxIterations => [0, 0, 0],
    }
}

/// RGB bytes, row-major from the top-left corner.
pub fn render_rgb<F: MeromorphicMap + ?Sized>(f: &F, win: &RenderWindow) -> Result<Vec<u8>> {
    win.validate()?;
    let rows: Vec<Vec<u8>> = (0..win.pixels_y)
        .into_par_iter()
        .map(|row| {
            let mut line = Vec::with_capacity(3 * win.pixels_x);
            for col in 0..win.pixels_x {
                let fate = pixel_fate(f, win.pixel(col, row), win)?;
                line.extend_from_slice(&color(fate, win.n_max));
            }
            Ok(line)
        })
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

pub fn write_ppm<W: Write>(mut out: W, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != 3 * width * height {
        return Err(NevlabError::InvalidArgument(format!(
            "{} bytes do not make a {width}x{height} RGB image",
            rgb.len()
        )));
    }
    let io = |e: std::io::Error| NevlabError::InvalidArgument(format!("ppm output: {e}"));
    write!(out, "P6\n{width} {height}\n255\n").map_err(io)?;
    out.write_all(rgb).map_err(io)?;
    out.flush().map_err(io)
}

pub fn render_ppm<F: MeromorphicMap + ?Sized, W: Write>(f: &F, win: &RenderWindow, out: W) -> Result<()> {
    let rgb = render_rgb(f, win)?;
    write_ppm(out, win.pixels_x, win.pixels_y, &rgb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nevanlinna::FunctionDescriptor;
    use std::f64::consts::PI;

    fn window(center: Complex64, width: f64, w: usize, h: usize) -> RenderWindow {
        RenderWindow { center, width, pixels_x: w, pixels_y: h, n_max: 64, escape_radius: 1e8 }
    }

    #[test]
    fn pixel_geometry() {
        let win = window(Complex64::new(1.0, 2.0), 4.0, 4, 2);
        assert_eq!(win.pixel(0, 0), Complex64::new(-0.5, 2.5));
        assert_eq!(win.pixel(3, 1), Complex64::new(2.5, 1.5));
    }

    #[test]
    fn pole_and_tract_pixels_differ() {
        let f = FunctionDescriptor::two_av(Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        // Left pixel centre at πi (a pole), right pixel at 10 + πi (deep in a tract).
        let win = window(Complex64::new(5.0, PI), 20.0, 2, 1);
        let rgb = render_rgb(&f, &win).unwrap();
        assert_eq!(pixel_fate(&f, win.pixel(0, 0), &win).unwrap().terminal, Terminal::ReachedInfinity);
        assert_ne!(rgb[0..3], rgb[3..6]);
    }

    #[test]
    fn ppm_header_and_size() {
        let f = FunctionDescriptor::two_av(Complex64::new(0.0, PI), Complex64::new(0.0, -PI)).unwrap();
        let win = window(Complex64::new(0.0, 0.0), 6.0, 7, 5);
        let mut buf = Vec::new();
        render_ppm(&f, &win, &mut buf).unwrap();
        let header = b"P6\n7 5\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 7 * 5 * 3);
        let mut again = Vec::new();
        render_ppm(&f, &win, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_oversized_windows() {
        let mut win = window(Complex64::new(0.0, 0.0), 1.0, MAX_SIDE + 1, 1);
        assert!(win.validate().is_err());
        win.pixels_x = 0;
        assert!(win.validate().is_err());
        win.pixels_x = 1;
        win.width = -1.0;
        assert!(win.validate().is_err());
    }

    #[test]
    fn colors_separate_the_terminals() {
        let pole = color(PixelFate { terminal: Terminal::ReachedInfinity, steps: 1 }, 64);
        let esc = color(PixelFate { terminal: Terminal::EscapedRadius, steps: 1 }, 64);
        let max = color(PixelFate { terminal: Terminal::MaxIterations, steps: 64 }, 64);
        assert!(pole != esc && esc != max && pole != max);
        assert_eq!(max, [0, 0, 0]);
    }
}
