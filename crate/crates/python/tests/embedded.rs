use brlab::brlab;
use pyo3::prelude::*;

fn run(code: &std::ffi::CStr) {
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn module_round_trips() {
    pyo3::append_to_inittab!(brlab);
    Python::initialize();
    run(c"
import brlab
w = brlab.w_state(3)
dec = brlab.family('w-ti-psd', 5, 1e-3)
assert dec.kind == 'psd'
target = brlab.family_target('w-ti-psd', 5)
assert dec.contract().distance(target) < 1e-2
two = brlab.family('two-domain', 6, 1e-2, 2)
assert two.kind == 'nonnegative' and two.r == 2
same = brlab.Decomposition.from_json(dec.to_json())
assert same.contract().distance(dec.contract()) == 0.0
assert brlab.Tensor.from_json(w.to_json()).distance(w) == 0.0
try:
    brlab.family('nope', 3, 0.1)
    raise SystemExit('unknown family accepted')
except brlab.BrlabError:
    pass
try:
    brlab.Tensor([2, 2], [1.0])
    raise SystemExit('bad shape accepted')
except brlab.BrlabError:
    pass
");
}
