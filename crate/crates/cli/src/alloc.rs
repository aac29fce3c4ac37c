//! Allocation-counting global allocator.
//!
//! Binaries opt in with `#[global_allocator]`. Counts are per thread so that
//! concurrent tests in one process do not disturb each other.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

thread_local! {
    static ALLOCATIONS: Cell<u64> = const { Cell::new(0) };
}

pub struct CountingAlloc;

fn bump() {
    // try_with: the slot may already be gone during thread teardown
    let _ = ALLOCATIONS.try_with(|c| c.set(c.get() + 1));
}

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        bump();
        unsafe { System.alloc(layout) }
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        bump();
        unsafe { System.alloc_zeroed(layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        bump();
        unsafe { System.realloc(ptr, layout, new_size) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

/// Allocations made by the calling thread so far.
pub fn thread_allocations() -> u64 {
    ALLOCATIONS.with(|c| c.get())
}

/// Whether [`CountingAlloc`] is the process allocator.
pub fn is_active() -> bool {
    let before = thread_allocations();
    let b = std::hint::black_box(Box::new(0u64));
    drop(b);
    thread_allocations() > before
}
