//! Peak heap use of the cross-mode kernels, measured with a counting allocator.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use common::*;
use nort::splr::{kron_matvec_into, kron_rmatvec_into, Scratch};
use nort::{LinearOperator, Mode, Shape3, SplrOperator};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
        PEAK.fetch_max(now, Ordering::SeqCst);
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

// The counters are process-wide, so measurements must not overlap.
static SERIAL: Mutex<()> = Mutex::new(());

/// Extra heap bytes held at the high-water mark of `f`.
fn peak_extra(f: impl FnOnce()) -> usize {
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    f();
    PEAK.load(Ordering::SeqCst) - base
}

#[test]
fn cross_mode_kernels_use_vector_sized_memory() {
    let _guard = SERIAL.lock().unwrap();
    let shape = Shape3::new(60, 50, 40).unwrap();
    let numel = shape.numel();
    let mut r = rng(11);
    for src in Mode::ALL {
        let pair = random_pair(shape, src, 4, &mut r);
        for target in src.others() {
            // Inputs and outputs are the unfolding's columns and rows.
            let io = (numel / shape.dim(target) + numel / shape.dim(src)) * 8;
            let b = vec![0.5; shape.unfolded_cols(target)];
            let a = vec![0.5; shape.dim(target)];
            let mut y = vec![0.0; shape.dim(target)];
            let mut z = vec![0.0; shape.unfolded_cols(target)];

            let mut scratch = Scratch::new();
            let first = peak_extra(|| {
                kron_matvec_into(1.0, &pair, target, &b, &mut y, &mut scratch).unwrap();
                kron_rmatvec_into(1.0, &pair, target, &a, &mut z, &mut scratch).unwrap();
            });
            assert!(
                first <= 2 * io,
                "{src}->{target}: {first} bytes vs budget {io}"
            );
            // A warm scratch buffer means no further allocation at all.
            let again = peak_extra(|| {
                kron_matvec_into(1.0, &pair, target, &b, &mut y, &mut scratch).unwrap();
                kron_rmatvec_into(1.0, &pair, target, &a, &mut z, &mut scratch).unwrap();
            });
            assert_eq!(again, 0, "{src}->{target} allocated on a warm scratch");
        }
    }
}

#[test]
fn operator_products_never_densify() {
    let _guard = SERIAL.lock().unwrap();
    let shape = Shape3::new(60, 50, 40).unwrap();
    let numel = shape.numel();
    let mut r = rng(12);
    let x = random_point(shape, 3, 3, &mut r);
    let obs = random_sparse(shape, 2_000, &mut r);
    let op = SplrOperator::new(x, Some((-0.5, obs))).unwrap();
    for mode in Mode::ALL {
        let view = op.view(mode);
        let b = vec![1.0; view.ncols()];
        let a = vec![1.0; view.nrows()];
        let mut y = vec![0.0; view.nrows()];
        let mut z = vec![0.0; view.ncols()];
        let used = peak_extra(|| {
            view.matvec(&b, &mut y);
            view.rmatvec(&a, &mut z);
        });
        assert!(
            used < numel * 8,
            "{mode}: {used} bytes for a {numel}-entry tensor"
        );
        assert!(
            used <= 2 * (view.ncols() + view.nrows()) * 8,
            "{mode}: {used} bytes"
        );
    }
}
