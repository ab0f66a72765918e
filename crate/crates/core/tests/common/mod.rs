//! Helpers shared by the integration test targets.

/// Basis-blade product computed by explicit symbol manipulation, independent
/// of the bit-counting implementation: concatenate the generator lists,
/// bubble-sort adjacent pairs (one sign flip per swap), and eliminate equal
/// adjacent generators with e_k e_k = -1.
pub fn blade_mul_oracle(a: u32, b: u32) -> (u32, f64) {
    let mut symbols: Vec<u32> = Vec::new();
    for k in 0..32 {
        if a >> k & 1 == 1 {
            symbols.push(k);
        }
    }
    for k in 0..32 {
        if b >> k & 1 == 1 {
            symbols.push(k);
        }
    }
    let mut sign = 1.0f64;
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < symbols.len() {
            if symbols[i] == symbols[i + 1] {
                symbols.drain(i..=i + 1);
                sign = -sign;
                changed = true;
                i = i.saturating_sub(1);
            } else if symbols[i] > symbols[i + 1] {
                symbols.swap(i, i + 1);
                sign = -sign;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
    let mut mask = 0u32;
    for s in symbols {
        mask |= 1 << s;
    }
    (mask, sign)
}

#[allow(dead_code)]
pub fn assert_close(actual: f64, expected: f64, tol: f64, label: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{label}: got {actual:.16e}, expected {expected:.16e} (tol {tol:.1e})"
    );
}
