#![no_main]

use gosched::neural::Mlp;
use gosched::numerics::Vector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = Mlp::from_json(text) {
        let input = Vector::zeros(net.sizes()[0]);
        let _ = net.predict(&input);
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }
});
