//! OS plumbing for pings: handler installation, per-thread publisher table,
//! and directed signal delivery.
//!
//! The handler only touches the interrupted thread's own slots through a
//! const-initialized thread-local table, performs no allocation and takes no
//! locks.

use std::io;
use std::ptr;
use std::sync::atomic::{AtomicPtr, Ordering};
use std::sync::Mutex;

use crate::domain::ThreadSlot;
use crate::error::DomainError;

/// Maximum number of domains a single thread may be registered in at once.
pub const PUBLISHER_CAPACITY: usize = 8;

thread_local! {
    static PUBLISHERS: [AtomicPtr<ThreadSlot>; PUBLISHER_CAPACITY] =
        const { [const { AtomicPtr::new(ptr::null_mut()) }; PUBLISHER_CAPACITY] };
    static TOKEN: u8 = const { 0 };
}

static INSTALLED: Mutex<Vec<libc::c_int>> = Mutex::new(Vec::new());

extern "C" fn on_ping(_sig: libc::c_int, _info: *mut libc::siginfo_t, _ctx: *mut libc::c_void) {
    let _ = PUBLISHERS.try_with(|table| {
        for entry in table {
            let slot = entry.load(Ordering::Relaxed);
            if !slot.is_null() {
                // SAFETY: entries are cleared before their slot can be released.
                unsafe {
                    (*slot).publish();
                    (*slot).note_handler_run();
                }
            }
        }
    });
}

/// Installs the publish handler for `signo` once per process.
pub(crate) fn install_handler(signo: libc::c_int) -> Result<(), DomainError> {
    let mut installed = INSTALLED.lock().unwrap_or_else(|e| e.into_inner());
    if installed.contains(&signo) {
        return Ok(());
    }
    unsafe {
        let mut action: libc::sigaction = std::mem::zeroed();
        let handler: extern "C" fn(libc::c_int, *mut libc::siginfo_t, *mut libc::c_void) = on_ping;
        action.sa_sigaction = handler as usize;
        action.sa_flags = libc::SA_SIGINFO | libc::SA_RESTART;
        libc::sigemptyset(&mut action.sa_mask);
        if libc::sigaction(signo, &action, ptr::null_mut()) != 0 {
            return Err(DomainError::SignalInstall(
                io::Error::last_os_error().raw_os_error().unwrap_or(0),
            ));
        }
    }
    installed.push(signo);
    Ok(())
}

/// Adds `slot` to the calling thread's publisher table, returning its index.
pub(crate) fn attach(slot: *const ThreadSlot) -> Result<usize, DomainError> {
    PUBLISHERS.with(|table| {
        for (i, entry) in table.iter().enumerate() {
            if entry.load(Ordering::Relaxed).is_null() {
                entry.store(slot as *mut ThreadSlot, Ordering::Relaxed);
                std::sync::atomic::compiler_fence(Ordering::SeqCst);
                return Ok(i);
            }
        }
        Err(DomainError::TooManyRegistrations(PUBLISHER_CAPACITY))
    })
}

pub(crate) fn detach(index: usize) {
    PUBLISHERS.with(|table| {
        std::sync::atomic::compiler_fence(Ordering::SeqCst);
        table[index].store(ptr::null_mut(), Ordering::Relaxed);
    });
}

/// Kernel thread id of the caller.
pub(crate) fn current_tid() -> libc::pid_t {
    unsafe { libc::syscall(libc::SYS_gettid) as libc::pid_t }
}

/// Address-based identity of the calling thread, unique among live threads.
pub(crate) fn thread_token() -> usize {
    TOKEN.with(|t| t as *const u8 as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Delivery {
    Sent,
    /// The target thread no longer exists.
    Gone,
    /// The kernel refused to queue another signal right now.
    Busy,
}

/// Sends `signo` to thread `tid` of this process.
pub(crate) fn ping_thread(tid: libc::pid_t, signo: libc::c_int) -> Delivery {
    let rc = unsafe {
        libc::syscall(
            libc::SYS_tgkill,
            libc::getpid() as libc::c_long,
            tid as libc::c_long,
            signo as libc::c_long,
        )
    };
    if rc == 0 {
        return Delivery::Sent;
    }
    match io::Error::last_os_error().raw_os_error() {
        Some(libc::ESRCH) => Delivery::Gone,
        Some(libc::EAGAIN) => Delivery::Busy,
        other => panic!("unexpected error delivering ping to thread {tid}: errno {other:?}"),
    }
}
