use soundnet::training::gradcheck::{toy_problem, ToyScale};
use soundnet::training::{gradient_check, GradCheckOptions};

use crate::{CmdResult, Failure, GradcheckArgs};

pub fn run(args: &GradcheckArgs) -> CmdResult {
    let scale: ToyScale = args.scale.parse()?;
    let (net, params, input) = toy_problem(scale, args.seed)?;
    let options = GradCheckOptions {
        samples: args.samples,
        seed: args.seed,
        corrupt_backward: args.corrupt_backward,
        ..GradCheckOptions::default()
    };
    let report = gradient_check(&net, &params, &input, &options)?;
    print!("{}", report.to_text());
    if report.passed(args.tolerance) {
        println!("PASS (tolerance {:e})", args.tolerance);
        Ok(())
    } else {
        Err(Failure::runtime(format!(
            "max relative error {:.3e} exceeds {:e}",
            report.max_relative_error, args.tolerance
        )))
    }
}
