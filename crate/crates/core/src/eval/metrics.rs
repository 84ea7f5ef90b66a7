//! Image difference metrics over 8-bit RGB grids.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::assets::TexelGrid;
use crate::error::{Error, Result};

/// Peak signal-to-noise ratio; identical images have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Identical,
    Db(f64),
}

impl Psnr {
    pub fn from_rmse(rmse: f64) -> Self {
        if rmse == 0.0 {
            Psnr::Identical
        } else {
            Psnr::Db(20.0 * (255.0 / rmse).log10())
        }
    }

    /// Decibels, with identical images mapped to +∞.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(d) => d,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Identical => f.write_str("identical"),
            Psnr::Db(d) => write!(f, "{d}"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Identical => s.serialize_str("identical"),
            Psnr::Db(d) => s.serialize_f64(*d),
        }
    }
}

fn check(a: &TexelGrid, b: &TexelGrid) -> Result<()> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Root mean squared difference over every channel of every texel.
pub fn rmse(a: &TexelGrid, b: &TexelGrid) -> Result<f64> {
    check(a, b)?;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok((sum / a.data.len().max(1) as f64).sqrt())
}

pub fn psnr(a: &TexelGrid, b: &TexelGrid) -> Result<Psnr> {
    rmse(a, b).map(Psnr::from_rmse)
}

/// RMSE restricted to texels where `mask` is set. An empty mask gives 0.
pub fn rmse_masked(a: &TexelGrid, b: &TexelGrid, mask: &[bool]) -> Result<f64> {
    check(a, b)?;
    if mask.len() != a.len() {
        return Err(Error::Dimension(format!("mask has {} entries for {} texels", mask.len(), a.len())));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for k in 0..3 {
            sum += (a.data[3 * i + k] as f64 - b.data[3 * i + k] as f64).powi(2);
        }
        n += 3;
    }
    Ok(if n == 0 { 0.0 } else { (sum / n as f64).sqrt() })
}

pub fn psnr_masked(a: &TexelGrid, b: &TexelGrid, mask: &[bool]) -> Result<Psnr> {
    rmse_masked(a, b, mask).map(Psnr::from_rmse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: u32, h: u32, data: Vec<u8>) -> TexelGrid {
        TexelGrid {
            width: w,
            height: h,
            coverage: vec![true; (w * h) as usize],
            data,
        }
    }

    #[test]
    fn examples() {
        let a = TexelGrid::filled(4, 4, [0; 3]);
        let b = TexelGrid::filled(4, 4, [255; 3]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(psnr(&a, &a).unwrap(), Psnr::Identical);
        assert_eq!(psnr(&a, &a).unwrap().to_string(), "identical");
        assert_eq!(rmse(&a, &b).unwrap(), 255.0);
        assert_eq!(psnr(&a, &b).unwrap(), Psnr::Db(0.0));

        // 12 channel differences: 10,0,0 | 0,0,0 | 0,20,0 | 0,0,0 → mean 500/12
        let x = grid(2, 2, vec![10, 0, 0, 5, 5, 5, 0, 20, 0, 1, 2, 3]);
        let y = grid(2, 2, vec![0, 0, 0, 5, 5, 5, 0, 0, 0, 1, 2, 3]);
        let want = (500.0f64 / 12.0).sqrt();
        assert!((rmse(&x, &y).unwrap() - want).abs() < 1e-12);
        let p = psnr(&x, &y).unwrap().db();
        assert!((p - 20.0 * (255.0 / want).log10()).abs() < 1e-12);
    }

    #[test]
    fn masked_and_dimension_errors() {
        let x = grid(2, 1, vec![10, 10, 10, 0, 0, 0]);
        let y = grid(2, 1, vec![0, 0, 0, 0, 0, 0]);
        assert_eq!(rmse_masked(&x, &y, &[false, true]).unwrap(), 0.0);
        assert_eq!(rmse_masked(&x, &y, &[true, false]).unwrap(), 10.0);
        assert!(matches!(rmse(&x, &TexelGrid::new(1, 2)), Err(Error::Dimension(_))));
        assert!(matches!(rmse_masked(&x, &y, &[true]), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle_inequality(
            a in proptest::collection::vec(any::<u8>(), 48),
            b in proptest::collection::vec(any::<u8>(), 48),
            c in proptest::collection::vec(any::<u8>(), 48),
        ) {
            let (a, b, c) = (grid(4, 4, a), grid(4, 4, b), grid(4, 4, c));
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            // rmse is a scaled Euclidean norm, so the triangle inequality holds
            let ab = rmse(&a, &b).unwrap();
            let bc = rmse(&b, &c).unwrap();
            let ac = rmse(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
