//! Serialization helpers shared by the JSON outputs.

use serde::Serializer;

/// Writes non-finite floats as `null`; JSON has no representation for them.
pub fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}
