use std::sync::Arc;

use num_bigint::BigUint;

use super::{Interrupt, PrintBody, PrintFunctionSpec, PrintMessage, TaskControl};
use crate::protocol::OutputSeverity;

/// Trial divisions between two polls of the task control.
const POLL_EVERY: u64 = 1024;

/// `digits: D` for every evaluated command.
pub fn auto_digits() -> (PrintFunctionSpec, PrintBody) {
    let spec = PrintFunctionSpec {
        name: "auto_digits".into(),
        delay_ms: 250,
        timeout_ms: 1000,
        priority: 0,
        persistent: false,
        automatic: true,
        commands: vec!["eval".into()],
    };
    let body: PrintBody = Arc::new(|input, ctl| {
        ctl.check()?;
        Ok(match &input.outcome.value {
            Some(v) => vec![PrintMessage::new(OutputSeverity::Information, format!("digits: {}", v.to_str_radix(10).len()))],
            None => Vec::new(),
        })
    });
    (spec, body)
}

/// Smallest factor `d` with `2 <= d <= min(limit, isqrt(n))`, by trial
/// division.
pub fn smallest_factor(n: &BigUint, limit: &BigUint, ctl: &TaskControl) -> Result<Option<BigUint>, Interrupt> {
    let bound = n.sqrt().min(limit.clone());
    if let (Ok(n), Ok(bound)) = (u128::try_from(n), u64::try_from(&bound)) {
        return Ok(small_factor(n, bound, ctl)?.map(BigUint::from));
    }
    let bound = u64::try_from(&bound).unwrap_or(u64::MAX);
    let mut steps = 0u64;
    let mut d = 2u64;
    while d <= bound {
        if (n % d) == BigUint::ZERO {
            return Ok(Some(BigUint::from(d)));
        }
        steps += 1;
        if steps.is_multiple_of(POLL_EVERY) {
            ctl.check()?;
        }
        d = if d == 2 { 3 } else { d.saturating_add(2) };
        if d == u64::MAX {
            break;
        }
    }
    Ok(None)
}

fn small_factor(n: u128, bound: u64, ctl: &TaskControl) -> Result<Option<u64>, Interrupt> {
    if bound >= 2 && n.is_multiple_of(2) {
        return Ok(Some(2));
    }
    let mut steps = 0u64;
    let mut d = 3u64;
    while d <= bound {
        if n.is_multiple_of(d as u128) {
            return Ok(Some(d));
        }
        steps += 1;
        if steps.is_multiple_of(POLL_EVERY) {
            ctl.check()?;
        }
        d = match d.checked_add(2) {
            Some(d) => d,
            None => break,
        };
    }
    Ok(None)
}

/// Overlay-only: smallest nontrivial factor of the result, up to the limit
/// given as first argument.
pub fn search_factor() -> (PrintFunctionSpec, PrintBody) {
    let spec = PrintFunctionSpec {
        name: "search_factor".into(),
        delay_ms: 0,
        timeout_ms: 0,
        priority: -1,
        persistent: true,
        automatic: false,
        commands: vec!["eval".into()],
    };
    let body: PrintBody = Arc::new(|input, ctl| {
        let limit = match input.args.first().map(|a| a.parse::<BigUint>()) {
            Some(Ok(l)) => l,
            Some(Err(_)) => return Ok(vec![PrintMessage::new(OutputSeverity::Error, "search_factor: bad limit")]),
            None => return Ok(vec![PrintMessage::new(OutputSeverity::Error, "search_factor: missing limit")]),
        };
        let Some(n) = &input.outcome.value else {
            return Ok(vec![PrintMessage::new(OutputSeverity::Error, "search_factor: no value")]);
        };
        Ok(match smallest_factor(n, &limit, ctl)? {
            Some(d) => vec![PrintMessage {
                severity: OutputSeverity::Information,
                body: format!("factor: {d}"),
                sendback: Some(format!("eval {}", n / &d)),
            }],
            None => vec![PrintMessage::new(OutputSeverity::Information, format!("no factor up to {limit}"))],
        })
    });
    (spec, body)
}
