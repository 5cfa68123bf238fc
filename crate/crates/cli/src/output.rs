// SPDX-License-Identifier: Apache-2.0

//! Plain-text frame, diagnostics and summary files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anisoflow::{Curve, StepRecord};

pub const DIAGNOSTICS_HEADER: &str = "t,energy,ratio,min_edge,newton_iters,stability_slack,dt_over_h";

/// Fixed 17-significant-digit formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn frame_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("frame_{step:06}.csv"))
}

pub fn lifted_frame_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("frame3d_{step:06}.csv"))
}

pub fn write_frame(path: &Path, curve: &Curve) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "j,x1,x2")?;
    for (j, x) in curve.nodes().iter().enumerate() {
        writeln!(w, "{j},{},{}", num(x.x), num(x.y))?;
    }
    w.flush()
}

pub fn write_lifted_frame(path: &Path, points: &[[f64; 3]]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "j,x1,x2,x3")?;
    for (j, p) in points.iter().enumerate() {
        writeln!(w, "{j},{},{},{}", num(p[0]), num(p[1]), num(p[2]))?;
    }
    w.flush()
}

pub struct Diagnostics {
    out: BufWriter<File>,
}

impl Diagnostics {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self { out })
    }

    /// The initial row carries zero iterations and zero slack.
    pub fn append(&mut self, r: &StepRecord<f64>, dt_over_h: f64) -> io::Result<()> {
        let (iters, slack) = r
            .report
            .as_ref()
            .map(|rep| (rep.iterations, rep.stability_slack))
            .unwrap_or((0, 0.0));
        writeln!(
            self.out,
            "{},{},{},{},{iters},{},{}",
            num(r.time),
            num(r.energy),
            num(r.ratio.unwrap_or(f64::NAN)),
            num(r.min_edge),
            num(slack),
            num(dt_over_h)
        )
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
