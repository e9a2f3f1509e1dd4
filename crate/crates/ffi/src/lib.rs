//! C ABI over the tabforge compiler, monitor and in-memory chain.
//!
//! Every fallible call returns a [`TabforgeStatus`]. On anything but `Ok`,
//! `tabforge_last_error_code` and `tabforge_last_error_message` describe the
//! failure on the calling thread. Strings handed out through `*_out`
//! pointers are owned by the caller and released with `tabforge_string_free`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use tabforge::bpmn::parse_bpmn;
use tabforge::chain::{Chain, Identity};
use tabforge::defsm::{compile, DefsmPackage};
use tabforge::dmn::{parse_dmn_all, Value};
use tabforge::gateway::{dev_genesis, parse_cid, Gateway, GatewayError, MemoryCas, UreqClient};
use tabforge::monitor::Monitor;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabforgeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    /// A domain error; see `tabforge_last_error_code`.
    Failed = 4,
    Panicked = 5,
}

/// Opaque: an in-memory chain, document store and signing identity.
pub struct TabforgeSession {
    gateway: Gateway,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', "\u{fffd}")).expect("nul bytes replaced")
}

fn set_error(code: &str, message: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { code: c_string(code), message: c_string(message) }));
}

struct Fail(TabforgeStatus, GatewayError);

impl From<GatewayError> for Fail {
    fn from(e: GatewayError) -> Self {
        Fail(TabforgeStatus::Failed, e)
    }
}

fn fail(status: TabforgeStatus, code: &str, message: impl Into<String>) -> Fail {
    Fail(status, GatewayError::new(code, message))
}

/// Run `f`, recording any error or panic for the calling thread.
fn guarded(f: impl FnOnce() -> Result<(), Fail>) -> TabforgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TabforgeStatus::Ok
        }
        Ok(Err(Fail(status, e))) => {
            set_error(&e.code, &e.message);
            status
        }
        Err(_) => {
            set_error("Panicked", "internal panic");
            TabforgeStatus::Panicked
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(TabforgeStatus::NullArgument, "NullArgument", format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TabforgeStatus::InvalidUtf8, "InvalidUtf8", format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `items` is null only when `len` is 0; otherwise it points at `len` valid strings.
unsafe fn arg_list<'a>(items: *const *const c_char, len: usize, name: &str) -> Result<Vec<&'a str>, Fail> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if items.is_null() {
        return Err(fail(TabforgeStatus::NullArgument, "NullArgument", format!("`{name}` is null")));
    }
    std::slice::from_raw_parts(items, len).iter().map(|p| arg(*p, name)).collect()
}

/// # Safety
/// `out` is null or writable.
unsafe fn emit(out: *mut *mut c_char, value: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(TabforgeStatus::NullArgument, "NullArgument", "output pointer is null"));
    }
    *out = c_string(value).into_raw();
    Ok(())
}

/// # Safety
/// `s` is null or a live session from `tabforge_session_new`.
unsafe fn session<'a>(s: *const TabforgeSession) -> Result<&'a TabforgeSession, Fail> {
    s.as_ref().ok_or_else(|| fail(TabforgeStatus::NullArgument, "NullArgument", "session is null"))
}

/// Create a session signing as `actor` with a 32-byte Ed25519 seed.
/// Returns null if either pointer is null or `actor` is not UTF-8.
///
/// # Safety
/// `actor` is a NUL-terminated string; `seed` points at 32 readable bytes.
#[no_mangle]
pub unsafe extern "C" fn tabforge_session_new(actor: *const c_char, seed: *const u8) -> *mut TabforgeSession {
    let mut made = ptr::null_mut();
    guarded(|| {
        let actor = arg(actor, "actor")?;
        if seed.is_null() {
            return Err(fail(TabforgeStatus::NullArgument, "NullArgument", "`seed` is null"));
        }
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(std::slice::from_raw_parts(seed, 32));
        let id = Identity::from_seed(actor, bytes);
        let chain = Chain::new(dev_genesis(&id), Arc::new(Monitor));
        let gateway = Gateway::new(chain, Arc::new(MemoryCas::new()), id, Arc::new(UreqClient::default()));
        made = Box::into_raw(Box::new(TabforgeSession { gateway }));
        Ok(())
    });
    made
}

/// # Safety
/// `session` is null or came from `tabforge_session_new` and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tabforge_session_free(session: *mut TabforgeSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Compile BPMN XML plus DMN XML documents into canonical package JSON.
///
/// # Safety
/// String arguments are NUL-terminated; `dmn_xml` holds `dmn_count` of them.
#[no_mangle]
pub unsafe extern "C" fn tabforge_compile(
    bpmn_xml: *const c_char,
    dmn_xml: *const *const c_char,
    dmn_count: usize,
    package_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let model = parse_bpmn(arg(bpmn_xml, "bpmn_xml")?).map_err(|e| GatewayError::new(e.code(), e.to_string()))?;
        let mut tables = Vec::new();
        for xml in arg_list(dmn_xml, dmn_count, "dmn_xml")? {
            tables.extend(parse_dmn_all(xml.as_bytes()).map_err(|e| GatewayError::new(e.code(), e.to_string()))?);
        }
        let pkg = compile(&model, &tables).map_err(|e| GatewayError::new(e.code(), e.to_string()))?;
        emit(package_out, std::str::from_utf8(&pkg.to_bytes()).expect("json is utf-8"))
    })
}

/// # Safety
/// `session` is live; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tabforge_deploy(
    session: *const TabforgeSession,
    package_json: *const c_char,
    contract_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        let pkg = DefsmPackage::from_bytes(arg(package_json, "package_json")?.as_bytes())
            .map_err(|e| GatewayError::new("MalformedPackage", e.to_string()))?;
        emit(contract_out, &s.gateway.deploy(&pkg)?)
    })
}

/// # Safety
/// `session` is live; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tabforge_start(
    session: *const TabforgeSession,
    contract: *const c_char,
    instance_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        emit(instance_out, &s.gateway.start(arg(contract, "contract")?)?)
    })
}

/// Complete `task`. `params_json` is null or a JSON object of scalars;
/// `doc_cids` lists `doc_count` cids previously stored with `tabforge_cas_put`.
/// Writes the transaction digest.
///
/// # Safety
/// `session` is live; strings are NUL-terminated; `doc_cids` holds `doc_count` strings.
#[no_mangle]
pub unsafe extern "C" fn tabforge_complete(
    session: *const TabforgeSession,
    instance: *const c_char,
    task: *const c_char,
    params_json: *const c_char,
    doc_cids: *const *const c_char,
    doc_count: usize,
    tx_digest_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        let mut params = BTreeMap::new();
        if !params_json.is_null() {
            let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(arg(params_json, "params_json")?)
                .map_err(|e| fail(TabforgeStatus::InvalidJson, "InvalidJson", e.to_string()))?;
            for (k, v) in raw {
                let value = Value::from_json(&v)
                    .ok_or_else(|| fail(TabforgeStatus::InvalidJson, "BadArgs", format!("param `{k}` is not a scalar")))?;
                params.insert(k, value);
            }
        }
        let cids = arg_list(doc_cids, doc_count, "doc_cids")?
            .into_iter()
            .map(|c| parse_cid(c).map_err(GatewayError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let receipt = s.gateway.complete(arg(instance, "instance")?, arg(task, "task")?, params, &cids)?;
        emit(tx_digest_out, &receipt.tx_digest.to_string())
    })
}

/// Enabled task ids as a JSON array.
///
/// # Safety
/// `session` is live; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tabforge_enabled_tasks(
    session: *const TabforgeSession,
    instance: *const c_char,
    tasks_json_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        let tasks = s.gateway.tasks(arg(instance, "instance")?)?;
        emit(tasks_json_out, &serde_json::to_string(&tasks).expect("strings serialize"))
    })
}

/// # Safety
/// `session` is live; strings are NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tabforge_instance_json(
    session: *const TabforgeSession,
    instance: *const c_char,
    instance_json_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        let inst = s.gateway.instance(arg(instance, "instance")?)?;
        emit(instance_json_out, &serde_json::to_string(&inst).expect("instance serializes"))
    })
}

/// Store `len` bytes; writes their cid.
///
/// # Safety
/// `session` is live; `bytes` points at `len` readable bytes (or is null with `len` 0).
#[no_mangle]
pub unsafe extern "C" fn tabforge_cas_put(
    session: *const TabforgeSession,
    bytes: *const u8,
    len: usize,
    cid_out: *mut *mut c_char,
) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        let data = match (bytes.is_null(), len) {
            (_, 0) => &[][..],
            (true, _) => return Err(fail(TabforgeStatus::NullArgument, "NullArgument", "`bytes` is null")),
            (false, n) => std::slice::from_raw_parts(bytes, n),
        };
        emit(cid_out, &s.gateway.put_document(data)?.to_string())
    })
}

/// # Safety
/// `session` is live.
#[no_mangle]
pub unsafe extern "C" fn tabforge_state_hash(session: *const TabforgeSession, hash_out: *mut *mut c_char) -> TabforgeStatus {
    guarded(|| {
        let s = self::session(session)?;
        emit(hash_out, &s.gateway.state_hash().to_string())
    })
}

/// Error code of the last failed call on this thread, or null. Valid until
/// the next call on this thread.
#[no_mangle]
pub extern "C" fn tabforge_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Message of the last failed call on this thread, or null.
#[no_mangle]
pub extern "C" fn tabforge_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// # Safety
/// `s` is null or a string returned through a `*_out` pointer, freed once.
#[no_mangle]
pub unsafe extern "C" fn tabforge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
