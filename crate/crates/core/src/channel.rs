//! User geometry, path loss and i.i.d. Rayleigh channel draws.
//!
//! Randomness comes from ChaCha8 ([`rand_chacha::ChaCha8Rng`]). A [`Seed`] is a
//! `(root, stream)` pair: the root seeds the key through `seed_from_u64` and
//! the stream selects one of ChaCha's 2^64 independent streams. Child seeds
//! keep the root and derive a new stream with a SplitMix64 mix of the parent
//! stream and the child index, so every trial, user or beam matrix has its
//! own stream and draws do not depend on scheduling order.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reference path loss at 1 m, `10^-3.53`.
pub const PATH_LOSS_AT_1M: f64 = 2.951_209_226_666_387e-4;
pub const PATH_LOSS_EXPONENT: f64 = 3.76;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub root: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl Seed {
    pub fn new(root: u64) -> Self {
        Seed { root, stream: 0 }
    }

    pub fn child(&self, index: u64) -> Seed {
        Seed {
            root: self.root,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5EED))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(self.stream);
        rng
    }
}

/// Where the transmitter sits relative to the square user area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Users on `[0, side]²`, transmitter at the corner.
    #[default]
    Corner,
    /// Users on `[-side/2, side/2]²`, transmitter at the centre.
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Geometry {
    pub placement: Placement,
    /// Distance floor applied before evaluating path loss, meters.
    pub d_min: f64,
    /// Distance at which the scalar reference path loss is evaluated, meters.
    pub d_ref: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            placement: Placement::Corner,
            d_min: 1.0,
            d_ref: 30.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0) || !(self.d_ref > 0.0) {
            return Err(Error::Config(format!(
                "d_min and d_ref must be positive, got {} and {}",
                self.d_min, self.d_ref
            )));
        }
        Ok(())
    }

    /// Scalar path loss used by the closed-form and optimizer paths.
    pub fn reference_beta(&self) -> f64 {
        path_loss(self.d_ref, self.d_min)
    }
}

/// Distance-based path-loss gain `10^-3.53 / d^3.76`, with `d` floored at `d_min`.
pub fn path_loss(d: f64, d_min: f64) -> f64 {
    let d = if d < d_min {
        log::warn!("distance {d} m below floor, clamped to {d_min} m");
        d_min
    } else {
        d
    };
    PATH_LOSS_AT_1M * d.powf(-PATH_LOSS_EXPONENT)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    pub positions: Vec<[f64; 2]>,
    pub distances: Vec<f64>,
    pub betas: Vec<f64>,
}

impl UserLayout {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// The first `k` users. Layouts are drawn sequentially, so this equals
    /// the layout drawn with the same seed for `k` users.
    pub fn prefix(&self, k: usize) -> UserLayout {
        UserLayout {
            positions: self.positions[..k].to_vec(),
            distances: self.distances[..k].to_vec(),
            betas: self.betas[..k].to_vec(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["user", "x_m", "y_m", "d_m", "beta"])?;
        for (k, ((p, d), b)) in self.positions.iter().zip(&self.distances).zip(&self.betas).enumerate() {
            w.write_record([k.to_string(), p[0].to_string(), p[1].to_string(), d.to_string(), b.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<layout>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<UserLayout> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut layout = UserLayout { positions: vec![], distances: vec![], betas: vec![] };
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("layout row {row}: bad column {i}")))
            };
            let (x, y, d, b) = (field(1)?, field(2)?, field(3)?, field(4)?);
            if !(b > 0.0) {
                return Err(Error::Config(format!("layout row {row}: beta must be positive")));
            }
            layout.positions.push([x, y]);
            layout.distances.push(d);
            layout.betas.push(b);
        }
        Ok(layout)
    }
}

/// Draws `k_users` positions uniformly on the square and evaluates path loss.
pub fn place_users(seed: Seed, k_users: usize, area_side: f64, geometry: &Geometry) -> UserLayout {
    let mut rng = seed.rng();
    let offset = match geometry.placement {
        Placement::Corner => 0.0,
        Placement::Center => -area_side / 2.0,
    };
    let mut layout = UserLayout {
        positions: Vec::with_capacity(k_users),
        distances: Vec::with_capacity(k_users),
        betas: Vec::with_capacity(k_users),
    };
    for _ in 0..k_users {
        let x = offset + area_side * rng.random::<f64>();
        let y = offset + area_side * rng.random::<f64>();
        let d = x.hypot(y);
        layout.positions.push([x, y]);
        layout.distances.push(d);
        layout.betas.push(path_loss(d, geometry.d_min));
    }
    layout
}

/// One snapshot of all users' channels, row-major `k_users × l_beams`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub k_users: usize,
    pub l_beams: usize,
    pub h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.h[k * self.l_beams..(k + 1) * self.l_beams]
    }
}

/// Draws `h_k ~ CN(0, beta_k I)` for every user. Row `k` uses the stream
/// `seed.child(k)`, so user `k`'s channel does not depend on how many
/// other users there are.
pub fn draw_channels(seed: Seed, betas: &[f64], l_beams: usize) -> ChannelRealization {
    let mut h = Vec::with_capacity(betas.len() * l_beams);
    for (k, &beta) in betas.iter().enumerate() {
        let mut rng = seed.child(k as u64).rng();
        let scale = (beta / 2.0).sqrt();
        for _ in 0..l_beams {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            h.push(Complex64::new(scale * re, scale * im));
        }
    }
    ChannelRealization { k_users: betas.len(), l_beams, h }
}
