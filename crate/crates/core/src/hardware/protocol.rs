//! Newline-delimited JSON wire protocol for driving a plate device remotely.
//!
//! Requests: `{"id": <int>, "cmd": "set", "angles_deg": [<float>...]}`,
//! `{"id": <int>, "cmd": "measure"}`, or `{"id": <int>, "cmd": "info"}`.
//! Responses: `{"id": <int>, "ok": true}` for `set`,
//! `{"id": <int>, "ok": true, "stokes": [s0,s1,s2,s3]}` for `measure`,
//! `{"id": <int>, "ok": true, "plates": n, "angle_quantum_deg": q,
//! "motion_time_s": t}` for `info`, and
//! `{"id": <int>, "ok": false, "error": "<code>", "detail": "<text>"}` on
//! failure. Malformed lines and unknown commands answer with code
//! `bad-request` and the connection stays open. The server serializes
//! request handling: one request is in flight at a time.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardware::{DeviceInfo, PlateDevice, SimulatedDevice};
use crate::polarization::StokesVector;

/// Default client timeout for a single request round trip.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Serialize, Deserialize)]
struct WireRequest {
    id: u64,
    cmd: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angles_deg: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireResponse {
    id: u64,
    ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stokes: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle_quantum_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    motion_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

impl WireResponse {
    fn ok(id: u64) -> Self {
        Self {
            id,
            ok: true,
            stokes: None,
            plates: None,
            angle_quantum_deg: None,
            motion_time_s: None,
            error: None,
            detail: None,
        }
    }

    fn err(id: u64, code: &str, detail: String) -> Self {
        Self {
            ok: false,
            error: Some(code.to_string()),
            detail: Some(detail),
            ..Self::ok(id)
        }
    }
}

/// A running protocol server; dropping it (or calling [`shutdown`]) stops
/// the accept loop.
///
/// [`shutdown`]: DeviceServer::shutdown
pub struct DeviceServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl DeviceServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Unblock the accept call.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for DeviceServer {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop_accepting();
        }
    }
}

/// Binds `addr` and serves the device until shutdown. Connections are handled
/// on their own threads; device access is serialized through a mutex.
pub fn serve_device(
    device: SimulatedDevice,
    addr: impl ToSocketAddrs,
    verbose: bool,
) -> Result<DeviceServer> {
    let listener = TcpListener::bind(addr).map_err(|e| Error::Connection(e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Connection(e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let shared = Arc::new(Mutex::new(device));

    let accept_stop = Arc::clone(&stop);
    let accept_thread = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if accept_stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let device = Arc::clone(&shared);
            std::thread::spawn(move || handle_connection(stream, device, verbose));
        }
    });

    Ok(DeviceServer {
        addr,
        stop,
        accept_thread: Some(accept_thread),
    })
}

fn handle_connection(stream: TcpStream, device: Arc<Mutex<SimulatedDevice>>, verbose: bool) {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "?".into());
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<WireRequest>(&line) {
            Ok(request) => {
                if verbose {
                    eprintln!("[device] {peer} id={} cmd={}", request.id, request.cmd);
                }
                handle_request(request, &device)
            }
            Err(e) => {
                if verbose {
                    eprintln!("[device] {peer} malformed request: {e}");
                }
                WireResponse::err(0, "bad-request", format!("malformed request: {e}"))
            }
        };
        let Ok(mut payload) = serde_json::to_string(&response) else {
            break;
        };
        payload.push('\n');
        if writer.write_all(payload.as_bytes()).is_err() || writer.flush().is_err() {
            break;
        }
    }
}

fn handle_request(request: WireRequest, device: &Arc<Mutex<SimulatedDevice>>) -> WireResponse {
    let id = request.id;
    let mut device = match device.lock() {
        Ok(guard) => guard,
        Err(poisoned) => poisoned.into_inner(),
    };
    match request.cmd.as_str() {
        "set" => {
            let Some(angles) = request.angles_deg else {
                return WireResponse::err(id, "bad-request", "set requires angles_deg".into());
            };
            match device.set_plate_angles(&angles) {
                Ok(()) => WireResponse::ok(id),
                Err(e) => WireResponse::err(id, "invalid-argument", e.to_string()),
            }
        }
        "measure" => match device.measure_stokes() {
            Ok(s) => WireResponse {
                stokes: Some([s.s0, s.s1, s.s2, s.s3]),
                ..WireResponse::ok(id)
            },
            Err(e) => WireResponse::err(id, "device-error", e.to_string()),
        },
        "info" => match device.info() {
            Ok(info) => WireResponse {
                plates: Some(info.plate_count),
                angle_quantum_deg: Some(info.angle_quantum_deg),
                motion_time_s: Some(info.motion_time_s),
                ..WireResponse::ok(id)
            },
            Err(e) => WireResponse::err(id, "device-error", e.to_string()),
        },
        other => WireResponse::err(id, "bad-request", format!("unknown cmd `{other}`")),
    }
}

/// Remote handle implementing [`PlateDevice`] over the wire protocol.
pub struct DeviceClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    timeout: Duration,
}

impl DeviceClient {
    /// Connects with the default 5 s request timeout.
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Self::connect_with_timeout(addr, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Connection(e.to_string()))?;
        stream
            .set_read_timeout(Some(timeout))
            .map_err(|e| Error::Connection(e.to_string()))?;
        stream
            .set_write_timeout(Some(timeout))
            .map_err(|e| Error::Connection(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| Error::Connection(e.to_string()))?;
        Ok(Self {
            reader: BufReader::new(stream),
            writer,
            next_id: 1,
            timeout,
        })
    }

    fn call(&mut self, cmd: &str, angles_deg: Option<Vec<f64>>) -> Result<WireResponse> {
        let id = self.next_id;
        self.next_id += 1;
        let mut payload = serde_json::to_string(&WireRequest {
            id,
            cmd: cmd.to_string(),
            angles_deg,
        })?;
        payload.push('\n');
        self.writer
            .write_all(payload.as_bytes())
            .and_then(|()| self.writer.flush())
            .map_err(|e| self.classify_io(e))?;

        let mut line = String::new();
        let read = self
            .reader
            .read_line(&mut line)
            .map_err(|e| self.classify_io(e))?;
        if read == 0 {
            return Err(Error::Connection("server closed the connection".into()));
        }
        let response: WireResponse = serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("unparseable response: {e}")))?;
        if response.id != id {
            return Err(Error::Protocol(format!(
                "response id {} for request {id}",
                response.id
            )));
        }
        if !response.ok {
            return Err(Error::Device {
                code: response.error.unwrap_or_else(|| "unknown".into()),
                detail: response.detail.unwrap_or_default(),
            });
        }
        Ok(response)
    }

    fn classify_io(&self, e: std::io::Error) -> Error {
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => Error::Timeout(self.timeout),
            _ => Error::Connection(e.to_string()),
        }
    }
}

impl PlateDevice for DeviceClient {
    fn set_plate_angles(&mut self, targets_deg: &[f64]) -> Result<()> {
        self.call("set", Some(targets_deg.to_vec()))?;
        Ok(())
    }

    fn measure_stokes(&mut self) -> Result<StokesVector> {
        let response = self.call("measure", None)?;
        let s = response
            .stokes
            .ok_or_else(|| Error::Protocol("measure response lacks stokes".into()))?;
        Ok(StokesVector {
            s0: s[0],
            s1: s[1],
            s2: s[2],
            s3: s[3],
        })
    }

    fn info(&mut self) -> Result<DeviceInfo> {
        let response = self.call("info", None)?;
        Ok(DeviceInfo {
            plate_count: response
                .plates
                .ok_or_else(|| Error::Protocol("info response lacks plates".into()))?,
            angle_quantum_deg: response
                .angle_quantum_deg
                .ok_or_else(|| Error::Protocol("info response lacks angle_quantum_deg".into()))?,
            motion_time_s: response
                .motion_time_s
                .ok_or_else(|| Error::Protocol("info response lacks motion_time_s".into()))?,
        })
    }
}
