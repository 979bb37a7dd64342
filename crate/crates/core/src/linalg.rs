//! Thin wrappers over the two LAPACK routines the crate needs.

// Links the system OpenBLAS, which provides the LAPACK symbols.
extern crate openblas_src;

use lapack_sys::c_double_complex as Complex;

use crate::error::{Error, Result};
use crate::geometry::Point;

pub(crate) fn complex(re: f64, im: f64) -> Complex {
    Complex { re, im }
}

/// Eigenvalues of an upper Hessenberg complex matrix stored column-major.
/// The matrix is overwritten.
pub(crate) fn hessenberg_eigenvalues(h: &mut [Complex], n: usize) -> Result<Vec<Point>> {
    assert_eq!(h.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let ni = n as i32;
    let one = 1i32;
    let mut info = 0i32;
    let mut w = vec![complex(0.0, 0.0); n];
    let mut z = [complex(0.0, 0.0)];
    let mut query = [complex(0.0, 0.0)];
    let minus_one = -1i32;
    // SAFETY: all buffers are sized per the LAPACK contract; job 'E' and
    // compz 'N' leave Z untouched.
    unsafe {
        lapack_sys::zhseqr_(
            b"E".as_ptr() as *const _,
            b"N".as_ptr() as *const _,
            &ni,
            &one,
            &ni,
            h.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &one,
            query.as_mut_ptr(),
            &minus_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::EigensolveFailure(info));
    }
    let lwork = (query[0].re as usize).max(n).max(1);
    let mut work = vec![complex(0.0, 0.0); lwork];
    let lw = lwork as i32;
    unsafe {
        lapack_sys::zhseqr_(
            b"E".as_ptr() as *const _,
            b"N".as_ptr() as *const _,
            &ni,
            &one,
            &ni,
            h.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &lw,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::EigensolveFailure(info));
    }
    Ok(w.into_iter().map(|c| Point::new(c.re, c.im)).collect())
}

/// In-place lower Cholesky factor of a symmetric matrix (column-major).
/// On failure returns the LAPACK info value; entries above the diagonal are
/// zeroed on success.
pub(crate) fn cholesky_lower(a: &mut [f64], n: usize) -> std::result::Result<(), i32> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut info = 0i32;
    // SAFETY: `a` holds n*n entries with leading dimension n.
    unsafe {
        lapack_sys::dpotrf_(b"L".as_ptr() as *const _, &ni, a.as_mut_ptr(), &ni, &mut info);
    }
    if info != 0 {
        return Err(info);
    }
    for j in 0..n {
        for i in 0..j {
            a[i + j * n] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_triangular_matrix_are_its_diagonal() {
        let n = 3;
        let mut h = vec![complex(0.0, 0.0); 9];
        h[0] = complex(1.0, 0.0);
        h[4] = complex(0.0, 2.0);
        h[8] = complex(-3.0, 1.0);
        h[3] = complex(5.0, 5.0);
        let mut ev = hessenberg_eigenvalues(&mut h, n).unwrap();
        ev.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert!((ev[0].x + 3.0).abs() < 1e-12 && (ev[0].y - 1.0).abs() < 1e-12);
        assert!(ev[1].x.abs() < 1e-12 && (ev[1].y - 2.0).abs() < 1e-12);
        assert!((ev[2].x - 1.0).abs() < 1e-12 && ev[2].y.abs() < 1e-12);
    }

    #[test]
    fn rotation_block_has_imaginary_pair() {
        let mut h = vec![complex(0.0, 0.0), complex(1.0, 0.0), complex(-1.0, 0.0), complex(0.0, 0.0)];
        let ev = hessenberg_eigenvalues(&mut h, 2).unwrap();
        let mut ys: Vec<f64> = ev.iter().map(|p| p.y).collect();
        ys.sort_by(f64::total_cmp);
        assert!((ys[0] + 1.0).abs() < 1e-12 && (ys[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a0 = [4.0, 2.0, 2.0, 3.0];
        let mut a = a0;
        cholesky_lower(&mut a, 2).unwrap();
        let l = |i: usize, j: usize| a[i + j * 2];
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| l(i, k) * l(j, k)).sum();
                assert!((s - a0[i + 2 * j]).abs() < 1e-12);
            }
        }
        let mut bad = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_lower(&mut bad, 2).is_err());
    }
}
