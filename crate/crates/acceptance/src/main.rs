use std::process::ExitCode;

fn main() -> ExitCode {
    let mut all = true;
    for id in 1..=10 {
        let o = tscnn_acceptance::evaluate(id);
        println!("{}", o.line());
        all &= o.pass();
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
