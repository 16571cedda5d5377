//! Independent reference implementations used only by tests.
#![allow(dead_code)]

/// Line-by-line interpreter of the brace-balancing procedure, using string
/// `find`/`rfind`/slicing semantics on characters and a Python-style strip.
pub fn balance_reference(input: &str) -> String {
    let mut text: Vec<char> = input.chars().collect();
    let mut opening_count = text.iter().filter(|&&c| c == '{').count();
    let mut closing_count = text.iter().filter(|&&c| c == '}').count();

    if opening_count > closing_count {
        while opening_count > closing_count {
            if let Some(index) = text.iter().position(|&c| c == '{') {
                let mut next: Vec<char> = text[..index].to_vec();
                next.extend_from_slice(&text[index + 1..]);
                text = next;
                opening_count -= 1;
            }
        }
    } else if closing_count > opening_count {
        while closing_count > opening_count {
            if let Some(index) = text.iter().rposition(|&c| c == '}') {
                let mut next: Vec<char> = text[..index].to_vec();
                next.extend_from_slice(&text[index + 1..]);
                text = next;
                closing_count -= 1;
            }
        }
    }

    let s: String = text.into_iter().collect();
    s.trim().to_owned()
}

/// Interpreter of the stack-based brace-span removal. `initial` is the
/// starting value of the output buffer (the procedure as written starts from
/// a single space).
pub fn remove_braces_reference(input: &str, initial: &str) -> String {
    let mut stack: Vec<char> = Vec::new();
    let mut clean_text = String::from(initial);
    for ch in input.chars() {
        if ch == '{' {
            stack.push(ch);
        } else if ch == '}' {
            if !stack.is_empty() && *stack.last().unwrap() == '{' {
                stack.pop();
            }
        } else if stack.is_empty() {
            clean_text.push(ch);
        }
    }
    clean_text
}

/// Per-class precision/recall/F1 counted directly from label vectors.
pub fn macro_f1_reference(predicted: &[u8], gold: &[u8]) -> f64 {
    let mut total = 0.0;
    for class in [0u8, 1] {
        let mut hit = 0u64;
        let mut predicted_class = 0u64;
        let mut gold_class = 0u64;
        for (&p, &g) in predicted.iter().zip(gold) {
            if p == class {
                predicted_class += 1;
            }
            if g == class {
                gold_class += 1;
            }
            if p == class && g == class {
                hit += 1;
            }
        }
        let precision = if predicted_class == 0 { 0.0 } else { hit as f64 / predicted_class as f64 };
        let recall = if gold_class == 0 { 0.0 } else { hit as f64 / gold_class as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        total += f1;
    }
    total / 2.0
}

/// Mean logistic loss over dense rows, written without any shared code.
pub fn dense_logistic_loss(weights: &[f64], rows: &[(Vec<f64>, f64)]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in rows {
        let z: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-z).exp());
        sum += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    sum / rows.len() as f64
}

/// Central finite-difference gradient of `f` at `w`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, w: &[f64], h: f64) -> Vec<f64> {
    let mut point = w.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + h;
            let up = f(&point);
            point[i] = orig - h;
            let down = f(&point);
            point[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error between two vectors in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// One AdamW step on a single scalar, from zero moments.
pub fn scalar_adamw_first_step(w: f64, g: f64, lr: f64, beta1: f64, beta2: f64, eps: f64, decay: f64) -> f64 {
    let m = (1.0 - beta1) * g;
    let v = (1.0 - beta2) * g * g;
    let m_hat = m / (1.0 - beta1);
    let v_hat = v / (1.0 - beta2);
    w - lr * m_hat / (v_hat.sqrt() + eps) - lr * decay * w
}
