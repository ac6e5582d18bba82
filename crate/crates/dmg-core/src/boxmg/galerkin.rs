//! Galerkin coarsening P^T A P carried out directly in stencil form.
//!
//! The coarse operator of a 9-point stencil under operator-induced
//! interpolation again fits a 9-point stencil, so no entries are dropped.

use super::interp::Interpolation;
use crate::stencil::{offset_index, Stencil9, OFFSETS};

/// Coarse stencil A_c = P^T A P.
pub fn galerkin_coarsen(op: &Stencil9, interp: &Interpolation) -> Stencil9 {
    let (nxi, nyi) = op.dims();
    let (ncx, ncy) = interp.coarse_dims();
    debug_assert_eq!(interp.fine_dims(), (nxi, nyi));
    let mut coarse = Stencil9::zeros(ncx, ncy);

    for cj in 0..ncy {
        for ci in 0..ncx {
            let (fi, fj) = (2 * ci, 2 * cj);
            let target = cj * ncx + ci;
            // fine nodes interpolating from this coarse node live in the
            // 3x3 patch around its fine image
            for (pdi, pdj) in OFFSETS {
                let (i, j) = (fi as isize + pdi, fj as isize + pdj);
                if !op.in_range(i, j) {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                let p = j * nxi + i;
                let mut w1 = 0.0;
                for (c, w) in interp.node(p).iter() {
                    if c == target {
                        w1 = w;
                    }
                }
                if w1 == 0.0 {
                    continue;
                }
                let st = op.coeffs(i, j);
                for (o, &(di, dj)) in OFFSETS.iter().enumerate() {
                    let a = st[o];
                    if a == 0.0 {
                        continue;
                    }
                    let (qi, qj) = (i as isize + di, j as isize + dj);
                    if !op.in_range(qi, qj) {
                        continue;
                    }
                    let q = qj as usize * nxi + qi as usize;
                    for (cq, w2) in interp.node(q).iter() {
                        let (cqi, cqj) = ((cq % ncx) as isize, (cq / ncx) as isize);
                        let (ddi, ddj) = (cqi - ci as isize, cqj - cj as isize);
                        debug_assert!(ddi.abs() <= 1 && ddj.abs() <= 1);
                        coarse.coeffs_mut(ci, cj)[offset_index(ddi, ddj)] += w1 * a * w2;
                    }
                }
            }
        }
    }
    coarse
}
