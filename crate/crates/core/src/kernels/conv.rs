use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Added to the total variance in [`gridding_index`].
pub const GRIDDING_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Only positions where every tap lands inside the input.
    Valid,
    /// Output shaped like the input, zero extension outside.
    Same,
}

/// Extent of a `kernel_side` kernel dilated by `rate`: `(k - 1) * l + 1`.
pub fn receptive_field(kernel_side: usize, rate: usize) -> Result<usize> {
    if kernel_side == 0 || kernel_side.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "kernel side must be odd, got {kernel_side}"
        )));
    }
    if rate == 0 {
        return Err(Error::InvalidArgument("dilation rate must be at least 1".into()));
    }
    Ok((kernel_side - 1) * rate + 1)
}

fn check_kernel<T: Scalar>(k: &Grid2D<T>, rate: usize) -> Result<(usize, usize)> {
    let ew = receptive_field(k.width(), rate)?;
    let eh = receptive_field(k.height(), rate)?;
    Ok((ew, eh))
}

/// Dilated convolution: `out(p) = sum_t F(p - l * t) * k(t)`, kernel coordinates centered at 0.
///
/// With `Padding::Same` the output is indexed like the input. With
/// `Padding::Valid` output `(0, 0)` corresponds to input position
/// `(l * rx, l * ry)` where `rx, ry` are the kernel half-sides.
pub fn dilated_conv2d<T: Scalar>(f: &Grid2D<T>, k: &Grid2D<T>, rate: usize, padding: Padding) -> Result<Grid2D<T>> {
    let (ew, eh) = check_kernel(k, rate)?;
    let (rx, ry) = ((k.width() / 2) as isize, (k.height() / 2) as isize);
    let l = rate as isize;
    let (out_w, out_h, off_x, off_y) = match padding {
        Padding::Same => (f.width(), f.height(), 0, 0),
        Padding::Valid => {
            if ew > f.width() || eh > f.height() {
                return Err(Error::InvalidArgument(format!(
                    "dilated kernel extent {ew}x{eh} exceeds input {}x{}",
                    f.width(),
                    f.height()
                )));
            }
            (f.width() + 1 - ew, f.height() + 1 - eh, l * rx, l * ry)
        }
    };
    Ok(Grid2D::from_fn(out_w, out_h, |ox, oy| {
        let px = ox as isize + off_x;
        let py = oy as isize + off_y;
        let mut acc = T::zero();
        for ky in 0..k.height() {
            let ty = ky as isize - ry;
            for kx in 0..k.width() {
                let tx = kx as isize - rx;
                acc += f.get_or_zero(px - l * tx, py - l * ty) * k.get(kx, ky);
            }
        }
        acc
    }))
}

/// Applies `dilated_conv2d` with the same kernel for each rate in turn (same padding).
pub fn dilated_cascade<T: Scalar>(f: &Grid2D<T>, k: &Grid2D<T>, rates: &[usize]) -> Result<Grid2D<T>> {
    rates
        .iter()
        .try_fold(f.clone(), |acc, &r| dilated_conv2d(&acc, k, r, Padding::Same))
}

/// Spreads kernel taps `rate` cells apart, filling the gaps with zeros.
pub fn zero_insert<T: Scalar>(k: &Grid2D<T>, rate: usize) -> Result<Grid2D<T>> {
    let (ew, eh) = check_kernel(k, rate)?;
    let mut out = Grid2D::zeros(ew, eh);
    for ky in 0..k.height() {
        for kx in 0..k.width() {
            out.set(kx * rate, ky * rate, k.get(kx, ky));
        }
    }
    Ok(out)
}

/// Share of a grid's variance explained by the `(x mod l, y mod l)` residue classes.
///
/// Between-class variance (class means weighted by class size) divided by
/// total variance plus [`GRIDDING_EPS`]. 0 for a constant grid; close to 1
/// when the field is a pure period-`l` lattice pattern.
pub fn gridding_index<T: Scalar>(g: &Grid2D<T>, rate: usize) -> Result<T> {
    if rate == 0 || g.width() <= rate || g.height() <= rate {
        return Err(Error::InvalidArgument(format!(
            "gridding index needs a grid larger than the rate {rate} in both dimensions, got {}x{}",
            g.width(),
            g.height()
        )));
    }
    // pivot on the first value so constant grids give exact zeros
    let pivot = g.values()[0];
    let g = g.map(|v| v - pivot);
    let g = &g;
    let n = T::from_count(g.values().len());
    let mean = g.values().iter().copied().sum::<T>() / n;
    let total = g.values().iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;

    let classes = rate * rate;
    let mut sums = vec![T::zero(); classes];
    let mut counts = vec![0usize; classes];
    for y in 0..g.height() {
        for x in 0..g.width() {
            let c = (y % rate) * rate + x % rate;
            sums[c] += g.get(x, y);
            counts[c] += 1;
        }
    }
    let between = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| {
            let cm = s / T::from_count(c);
            T::from_count(c) * (cm - mean) * (cm - mean)
        })
        .sum::<T>()
        / n;
    Ok(between / (total + T::lit(GRIDDING_EPS)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Grid2D<f64> {
        Grid2D::from_fn(w, h, |x, y| (y * w + x) as f64 + 1.0)
    }

    #[test]
    fn receptive_field_values() {
        assert_eq!(receptive_field(3, 2).unwrap(), 5);
        assert_eq!(receptive_field(3, 1).unwrap(), 3);
        assert_eq!(receptive_field(3, 4).unwrap(), 9);
        assert!(receptive_field(4, 1).is_err());
        assert!(receptive_field(3, 0).is_err());
    }

    #[test]
    fn zero_inserted_extent_matches_receptive_field() {
        let k = Grid2D::<f64>::from_fn(3, 3, |_, _| 1.0);
        for l in 1..6 {
            let z = zero_insert(&k, l).unwrap();
            assert_eq!(z.width(), receptive_field(3, l).unwrap());
            assert_eq!(z.get(0, 0), 1.0);
            assert_eq!(z.get(z.width() - 1, z.height() - 1), 1.0);
        }
    }

    #[test]
    fn delta_kernel_is_identity() {
        let f = ramp(7, 5);
        let delta = Grid2D::impulse(3, 3, 1, 1);
        for l in 1..4 {
            assert_eq!(dilated_conv2d(&f, &delta, l, Padding::Same).unwrap(), f);
        }
    }

    #[test]
    fn valid_rate_two_on_five_by_five() {
        let f = ramp(5, 5);
        let ones = Grid2D::from_fn(3, 3, |_, _| 1.0);
        let out = dilated_conv2d(&f, &ones, 2, Padding::Valid).unwrap();
        assert_eq!((out.width(), out.height()), (1, 1));
        let expect: f64 = [0, 2, 4].iter().flat_map(|&y| [0, 2, 4].map(|x| f.get(x, y))).sum();
        assert_eq!(out.get(0, 0), expect);
    }

    #[test]
    fn convolution_flips_kernel() {
        // asymmetric kernel: a true convolution mirrors it around the impulse
        let f = Grid2D::<f64>::impulse(5, 5, 2, 2);
        let mut k = Grid2D::zeros(3, 3);
        k.set(2, 1, 1.0);
        let out = dilated_conv2d(&f, &k, 1, Padding::Same).unwrap();
        assert_eq!(out.get(3, 2), 1.0);
        let out = dilated_conv2d(&f, &k, 2, Padding::Same).unwrap();
        assert_eq!(out.get(4, 2), 1.0);
    }

    #[test]
    fn conv_errors() {
        let f = ramp(4, 4);
        let even = Grid2D::<f64>::zeros(2, 3);
        assert!(dilated_conv2d(&f, &even, 1, Padding::Same).is_err());
        let k = Grid2D::<f64>::zeros(3, 3);
        assert!(dilated_conv2d(&f, &k, 2, Padding::Valid).is_err());
        assert!(dilated_conv2d(&f, &k, 2, Padding::Same).is_ok());
        assert!(dilated_conv2d(&f, &k, 0, Padding::Same).is_err());
    }

    #[test]
    fn gridding_examples() {
        let c = Grid2D::from_fn(6, 6, |_, _| 3.5f64);
        assert_eq!(gridding_index(&c, 2).unwrap(), 0.0);
        let checker = Grid2D::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 1.0f64 } else { -1.0 });
        assert!((gridding_index(&checker, 2).unwrap() - 1.0).abs() < 1e-10);
        assert!(gridding_index(&c, 6).is_err());
        assert!(gridding_index(&c, 0).is_err());
    }

    #[test]
    fn degridding_cascade_lowers_index() {
        let impulse = Grid2D::<f64>::impulse(17, 17, 8, 8);
        let k = Grid2D::from_fn(3, 3, |_, _| 1.0);
        let gridded = dilated_cascade(&impulse, &k, &[2, 2]).unwrap();
        let degridded = dilated_cascade(&impulse, &k, &[2, 1]).unwrap();
        assert!(gridding_index(&gridded, 2).unwrap() > gridding_index(&degridded, 2).unwrap());
    }
}
