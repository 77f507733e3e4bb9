//! Per-thread floating-point operation counter.
//!
//! Kernels report the real flops their dense work performs; a complex
//! multiply-accumulate counts as 8. The counter is thread local, so
//! parallel drops in the harness never interfere with each other.

use std::cell::Cell;

thread_local! {
    static COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Real flops of one complex multiply-accumulate.
pub const CMAC: u64 = 8;

#[inline]
pub fn add(n: u64) {
    COUNT.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Records `n` complex multiply-accumulates.
#[inline]
pub fn add_cmac(n: usize) {
    add(CMAC * n as u64);
}

pub fn current() -> u64 {
    COUNT.with(Cell::get)
}

/// Runs `f` and returns its result along with the flops it recorded.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let start = current();
    let out = f();
    (out, current().wrapping_sub(start))
}
