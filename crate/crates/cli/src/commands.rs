use catfuse::grouplasso::{FitOptions, GroupLassoFit, LambdaNet, Solver, WeightSpec};
use catfuse::model_io::{FittedModel, Meta};
use catfuse::pdmr::{pdmr_net, pdmr_single, InfoCriterion, SelectionResult};
use catfuse::schema::{encode, Dataset, Layout, UnseenLevels};
use catfuse::simbench::{self, DiagnoseOptions, GroupLassoOnly, Oracle, Pdmr, SimConfig};
use catfuse::{PredictorSchema, RawTable};
use serde_json::json;

use crate::output::{config_hash, csv_bytes, header_line, read_input, write_output, CliError, VERSION};
use crate::{DataArgs, DiagnoseArgs, FitArgs, Method, NetArgs, PdmrArgs, PredictArgs, SimulateArgs, SolverArgs};

struct Loaded {
    schema: PredictorSchema,
    data: Dataset<f64>,
    inputs: Vec<Vec<u8>>,
}

fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    let bytes = read_input(&args.input)?;
    let table = RawTable::from_reader(&bytes[..])?;
    let mut inputs = vec![bytes];
    let schema = match &args.schema {
        Some(path) => {
            let text = read_input(path)?;
            let s = PredictorSchema::from_json(&String::from_utf8_lossy(&text), Some(&table))?;
            inputs.push(text);
            s
        }
        None => PredictorSchema::infer(&table, &args.response)?,
    };
    let data = encode(&table, &schema, &args.response)?;
    Ok(Loaded { schema, data, inputs })
}

fn fit_options(s: &SolverArgs) -> FitOptions {
    FitOptions {
        weights: WeightSpec::Exponent(s.weight_exponent),
        penalize_intercept: s.penalize_intercept,
        kkt_tol: s.kkt_tol,
        max_iter: s.max_iter,
        ..FitOptions::default()
    }
}

fn make_net(solver: &Solver<'_, f64>, net: &NetArgs) -> Result<LambdaNet<f64>, CliError> {
    let d = solver.data();
    let ratio = net.lambda_ratio.unwrap_or_else(|| LambdaNet::<f64>::default_ratio(d.n(), d.p()));
    if !(ratio > 0.0 && ratio <= 1.0) || net.nlambda == 0 {
        return Err(CliError::Input(format!("invalid net: {} values, ratio {ratio}", net.nlambda)));
    }
    Ok(LambdaNet::geometric(solver.lambda_max(), net.nlambda, ratio))
}

fn refs(inputs: &[Vec<u8>]) -> Vec<&[u8]> {
    inputs.iter().map(Vec::as_slice).collect()
}

fn level_name(layout: &Layout, c: usize) -> (&str, &str) {
    let tag = layout.tags()[c];
    let f = layout.factor(tag.factor);
    (f.name.as_str(), f.levels[tag.level].as_str())
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let loaded = load(&args.data)?;
    let hash = config_hash("fit", args, &refs(&loaded.inputs))?;
    let solver = Solver::new(&loaded.data, fit_options(&args.solver))?;
    let fits: Vec<GroupLassoFit<f64>> = match args.net.lambda {
        Some(l) => vec![solver.fit(l, None)?],
        None => solver
            .fit_path(&make_net(&solver, &args.net)?)
            .into_iter()
            .collect::<Result<_, _>>()?,
    };
    let layout = loaded.data.layout();
    let body = csv_bytes(&["lambda", "factor", "level", "coefficient"], |w| {
        for f in &fits {
            for (c, b) in f.beta.iter().enumerate() {
                let (factor, level) = level_name(layout, c);
                w.write_record([&f.lambda.to_string(), factor, level, &b.to_string()])?;
            }
        }
        Ok(())
    })?;
    let mut out = header_line(Some(args.seed), &hash).into_bytes();
    out.extend(body);
    write_output(args.output.as_deref(), &out)
}

fn criterion(args: &PdmrArgs) -> Result<InfoCriterion<f64>, CliError> {
    if let Some(l) = args.lambda_ic {
        return Ok(InfoCriterion::Fixed(l));
    }
    if let Some(s) = args.sigma {
        if !(s > 0.0) {
            return Err(CliError::Input(format!("sigma must be positive, got {s}")));
        }
        return Ok(InfoCriterion::Ric { sigma2: Some(s * s) });
    }
    match (args.ric, args.net.lambda) {
        // a single λ serves both screening and the criterion
        (false, Some(l)) => Ok(InfoCriterion::Fixed(l)),
        _ => Ok(InfoCriterion::Ric { sigma2: None }),
    }
}

fn summary(sel: &SelectionResult<f64>, data: &Dataset<f64>, screening: serde_json::Value) -> serde_json::Value {
    json!({
        "method": "pdmr",
        "n": data.n(),
        "p": data.p(),
        "size": sel.chosen.size(),
        "loss": sel.refit.loss,
        "lambda_ic": sel.lambda_ic,
        "sigma2": sel.sigma2,
        "screening": screening,
    })
}

pub fn pdmr(args: &PdmrArgs) -> Result<(), CliError> {
    let loaded = load(&args.data)?;
    let hash = config_hash("pdmr", args, &refs(&loaded.inputs))?;
    let data = &loaded.data;
    let opts = fit_options(&args.solver);
    let crit = criterion(args)?;
    let (selection, screening) = match args.net.lambda {
        Some(l) => {
            let res = pdmr_single(data, l, &opts, crit)?;
            let s = json!({ "lambda": l, "screened": res.family.screened });
            (res.selection, s)
        }
        None => {
            let solver = Solver::new(data, opts.clone())?;
            let net = make_net(&solver, &args.net)?;
            let res = pdmr_net(data, &net, &opts, crit)?;
            let failed = res.points.iter().filter(|p| p.error.is_some()).count();
            let s = json!({
                "lambda_max": net.lambda_max,
                "ratio": net.ratio,
                "nlambda": net.len(),
                "failed_lambdas": failed,
            });
            (res.selection, s)
        }
    };
    if let Some(path) = &args.trace {
        let body = csv_bytes(&["dimension", "lambda_index", "lambda", "loss", "criterion", "chosen"], |w| {
            for (i, c) in selection.candidates.iter().enumerate() {
                w.write_record([
                    c.size.to_string(),
                    c.lambda_index.map(|v| v.to_string()).unwrap_or_default(),
                    c.lambda.map(|v| v.to_string()).unwrap_or_default(),
                    c.loss.to_string(),
                    c.criterion.to_string(),
                    (i == selection.chosen_index).to_string(),
                ])?;
            }
            Ok(())
        })?;
        let mut out = header_line(Some(args.seed), &hash).into_bytes();
        out.extend(body);
        write_output(Some(path), &out)?;
    }
    let meta = Meta {
        tool_version: VERSION.to_owned(),
        seed: Some(args.seed),
        config_hash: hash,
    };
    let sum = summary(&selection, data, screening);
    let model = FittedModel::new(loaded.schema, &args.data.response, selection.chosen, selection.beta, meta)?
        .with_summary(sum);
    write_output(Some(&args.output), model.to_json()?.as_bytes())
}

pub fn predict(args: &PredictArgs) -> Result<(), CliError> {
    let model_bytes = read_input(&args.model)?;
    let model = FittedModel::from_json(&String::from_utf8_lossy(&model_bytes))?;
    let data_bytes = read_input(&args.input)?;
    let table = RawTable::from_reader(&data_bytes[..])?;
    let hash = config_hash("predict", args, &[&model_bytes, &data_bytes])?;
    let unseen = if args.unseen_as_reference {
        UnseenLevels::AsReference
    } else {
        UnseenLevels::Reject
    };
    let yhat = model.predict(&table, unseen)?;
    let body = csv_bytes(&["prediction"], |w| {
        for v in &yhat {
            w.write_record([v.to_string()])?;
        }
        Ok(())
    })?;
    let mut out = header_line(model.meta.seed, &hash).into_bytes();
    out.extend(body);
    write_output(args.output.as_deref(), &out)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let hash = config_hash("simulate", args, &[])?;
    let cfg = SimConfig {
        setting: args.setting,
        rho: args.rho,
        snr: args.snr.clone(),
        n_train: args.n_train,
        n_test: args.n_test,
        reps: args.reps,
        seed: args.seed,
        factors: args.factors,
        ..SimConfig::default()
    };
    let res = match args.method {
        Method::Pdmr => simbench::run(
            &cfg,
            &Pdmr {
                net_length: args.nlambda,
                ..Pdmr::default()
            },
        ),
        Method::Grouplasso => simbench::run(
            &cfg,
            &GroupLassoOnly {
                net_length: args.nlambda,
                ..GroupLassoOnly::default()
            },
        ),
        Method::Oracle => simbench::run(&cfg, &Oracle),
    }?;
    let mut out = header_line(Some(args.seed), &hash).into_bytes();
    simbench::write_records(&res.records, &mut out)?;
    write_output(args.out.as_deref(), &out)?;
    if args.out.is_some() {
        let mut lines = String::new();
        for a in &res.aggregates {
            lines.push_str(&serde_json::to_string(a)?);
            lines.push('\n');
        }
        write_output(None, lines.as_bytes())?;
    }
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let hash = config_hash("diagnose", args, &[])?;
    let cfg = SimConfig {
        setting: args.setting,
        rho: args.rho,
        snr: vec![args.snr],
        n_train: args.n_train,
        n_test: 1,
        reps: args.reps,
        seed: args.seed,
        factors: args.factors,
        ..SimConfig::default()
    };
    let opts = DiagnoseOptions {
        a: args.a,
        lambda: args.lambda,
        cone_budget: args.cone_budget,
        ..DiagnoseOptions::default()
    };
    let report = simbench::diagnose(&cfg, &opts)?;
    let doc = json!({
        "meta": { "tool_version": VERSION, "seed": args.seed, "config_hash": hash },
        "zeta_is_upper_estimate": true,
        "report": report,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_output(args.output.as_deref(), text.as_bytes())
}
