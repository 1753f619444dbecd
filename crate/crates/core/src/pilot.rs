//! Common pilot pool and its asynchronous (delay-extended) sensing matrix.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{CMat, Complex64, Error, Result};

const POOL_MAGIC: &[u8; 8] = b"CESBLPP\0";

/// `L x N_p` matrix of unit-norm pilot columns shared by every user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPool {
    pilots: CMat,
    seed: u64,
}

impl PilotPool {
    /// Wraps an existing matrix, normalizing each column to unit norm.
    pub fn from_matrix(mut pilots: CMat, seed: u64) -> Result<Self> {
        if pilots.nrows() == 0 || pilots.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "pilot matrix must be non-empty, got {}x{}",
                pilots.nrows(),
                pilots.ncols()
            )));
        }
        for mut col in pilots.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::InvalidDimension("zero pilot column".into()));
            }
            col.unscale_mut(norm);
        }
        Ok(Self { pilots, seed })
    }

    pub fn matrix(&self) -> &CMat {
        &self.pilots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Pilot length `L`.
    pub fn len(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Pool size `N_p`.
    pub fn count(&self) -> usize {
        self.pilots.ncols()
    }

    /// Writes the pool as a 16-byte header (8-byte magic, `L` and `N_p` as
    /// little-endian u32) followed by column-major interleaved `(re, im)`
    /// little-endian f64 pairs.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(POOL_MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.count() as u32).to_le_bytes())?;
        for z in self.pilots.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a pool written by [`PilotPool::write_to`]. The seed of an
    /// imported pool is unknown and set to 0.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(fmt)?;
        if &header[..8] != POOL_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let l = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n_p = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if l == 0 || n_p == 0 {
            return Err(Error::Format(format!("empty pool {l}x{n_p}")));
        }
        let mut data = Vec::with_capacity(l * n_p);
        let mut buf = [0u8; 16];
        for _ in 0..l * n_p {
            r.read_exact(&mut buf).map_err(fmt)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(fmt)? != 0 {
            return Err(Error::Format("trailing bytes after pool data".into()));
        }
        Ok(Self {
            pilots: CMat::from_vec(l, n_p, data),
            seed: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Draws `n_p` i.i.d. CN(0, 1) pilots of length `l` and normalizes each to
/// unit norm. Deterministic in `seed`.
pub fn generate_pilot_pool(l: usize, n_p: usize, seed: u64) -> Result<PilotPool> {
    if l == 0 || n_p == 0 {
        return Err(Error::InvalidDimension(format!(
            "pilot pool needs L >= 1 and N_p >= 1, got L={l}, N_p={n_p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pilots = CMat::from_fn(l, n_p, |_, _| crate::channel::complex_normal(&mut rng, 1.0));
    PilotPool::from_matrix(pilots, seed)
}

/// `[0; t] ++ s ++ [0; t_max - t]`.
pub fn extend_pilot(s: &[Complex64], t: i64, t_max: i64) -> Result<Vec<Complex64>> {
    if t_max < 0 {
        return Err(Error::OutOfRange {
            what: "t_m",
            value: t_max,
            range: "[0, inf)".into(),
        });
    }
    if t < 0 || t > t_max {
        return Err(Error::OutOfRange {
            what: "delay",
            value: t,
            range: format!("[0, {t_max}]"),
        });
    }
    let (t, t_max) = (t as usize, t_max as usize);
    let mut out = vec![Complex64::new(0.0, 0.0); s.len() + t_max];
    out[t..t + s.len()].copy_from_slice(s);
    Ok(out)
}

/// The sensing matrix with one column per (pilot, delay) pair, ordered
/// pilot-major: column `j = pilot * (t_m + 1) + delay`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPilotMatrix {
    matrix: CMat,
    max_delay: usize,
    pilot_count: usize,
}

impl ExtendedPilotMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_count
    }

    /// Extended pilot length `L + t_m`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of extended pilots `N_p (t_m + 1)`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `(pilot, delay)` carried by extended column `j`.
    pub fn row_map(&self, j: usize) -> Result<(usize, usize)> {
        if j >= self.cols() {
            return Err(Error::OutOfRange {
                what: "extended index",
                value: j as i64,
                range: format!("[0, {})", self.cols()),
            });
        }
        Ok((j / (self.max_delay + 1), j % (self.max_delay + 1)))
    }

    /// Inverse of [`row_map`](Self::row_map).
    pub fn index_of(&self, pilot: usize, delay: usize) -> Result<usize> {
        if pilot >= self.pilot_count {
            return Err(Error::OutOfRange {
                what: "pilot",
                value: pilot as i64,
                range: format!("[0, {})", self.pilot_count),
            });
        }
        if delay > self.max_delay {
            return Err(Error::OutOfRange {
                what: "delay",
                value: delay as i64,
                range: format!("[0, {}]", self.max_delay),
            });
        }
        Ok(pilot * (self.max_delay + 1) + delay)
    }
}

pub fn build_extended_matrix(pool: &PilotPool, t_m: usize) -> ExtendedPilotMatrix {
    let s = pool.matrix();
    let (l, n_p) = s.shape();
    let mut matrix = CMat::zeros(l + t_m, n_p * (t_m + 1));
    for i in 0..n_p {
        for t in 0..=t_m {
            let j = i * (t_m + 1) + t;
            matrix
                .view_mut((t, j), (l, 1))
                .copy_from(&s.column(i));
        }
    }
    ExtendedPilotMatrix {
        matrix,
        max_delay: t_m,
        pilot_count: n_p,
    }
}
