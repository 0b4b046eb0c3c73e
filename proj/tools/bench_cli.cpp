#include <CLI11.hpp>

#include <evo/bench.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string default_out_root() {
    const char* env = std::getenv("EVO_BENCH_OUT");
    return env ? env : ".";
}

std::vector<double> parse_cutoffs(const std::string& arg) {
    std::vector<double> out;
    for (const auto& item : evo::detail::split_list(arg))
        out.push_back(evo::detail::parse_number("cutoffs", item));
    return out;
}

void apply_overrides(evo::ExperimentSpec& spec, const std::string& out_override,
                     const std::string& cutoffs_override) {
    if (!out_override.empty()) spec.out_dir = out_override;
    else if (spec.out_dir == ".") spec.out_dir = default_out_root();
    if (!cutoffs_override.empty()) spec.cutoffs = parse_cutoffs(cutoffs_override);
    spec.validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolutionary-operator benchmark runner"};
    app.require_subcommand(1);

    std::string config_path, out_override, cutoffs_override, report_dir;
    std::uint64_t seed_offset = 0;

    CLI::App* run = app.add_subcommand("run", "run every experiment in a config file");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--seed-offset", seed_offset, "added to every run seed");
    run->add_option("--out", out_override, "output directory override");
    run->add_option("--cutoffs", cutoffs_override, "comma-separated cutoff seconds");

    CLI::App* transfer = app.add_subcommand(
        "transfer", "pre-train on the first experiment, evaluate the rest frozen");
    transfer->add_option("config", config_path, "config file")->required();
    transfer->add_option("--seed-offset", seed_offset, "added to every run seed");
    transfer->add_option("--out", out_override, "output directory override");
    transfer->add_option("--cutoffs", cutoffs_override, "comma-separated cutoff seconds");

    CLI::App* report = app.add_subcommand("report", "build the summary table from a results dir");
    report->add_option("dir", report_dir, "directory holding *_summary.csv files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto specs = evo::parse_config(read_file(config_path));
            for (auto& spec : specs) {
                apply_overrides(spec, out_override, cutoffs_override);
                std::cout << "running " << spec.name << " (" << spec.paradigm << "/" << spec.op
                          << ", " << spec.repeats << " repeats)\n";
                evo::ExperimentResult result = evo::run_experiment(spec, seed_offset);
                evo::emit_outputs(result, spec.out_dir);
                std::cout << "  final " << evo::format_double(result.final_mean) << " ("
                          << evo::format_double(result.final_std) << "), gen time mean "
                          << evo::format_double(result.gen_time.mean) << "s\n";
            }
        } else if (transfer->parsed()) {
            auto specs = evo::parse_config(read_file(config_path));
            if (specs.size() < 2)
                throw std::invalid_argument("transfer config needs a training section plus at "
                                            "least one evaluation section");
            for (auto& spec : specs) apply_overrides(spec, out_override, cutoffs_override);
            std::vector<evo::ExperimentSpec> evals(specs.begin() + 1, specs.end());
            std::cout << "pre-training on " << specs[0].name << "\n";
            evo::TransferResult result = evo::pretrain_and_transfer(specs[0], evals, seed_offset);
            evo::emit_outputs(result.train, specs[0].out_dir);
            std::cout << "  checkpoint: " << result.checkpoint_path << "\n";
            std::cout << "  learning gen time mean " << evo::format_double(result.train.gen_time.mean)
                      << "s\n";
            for (const auto& ev : result.evals) {
                evo::emit_outputs(ev, ev.spec.out_dir);
                std::cout << "  frozen run " << ev.spec.name << ": final "
                          << evo::format_double(ev.final_mean) << ", gen time mean "
                          << evo::format_double(ev.gen_time.mean) << "s\n";
            }
        } else if (report->parsed()) {
            evo::ReportTable table = evo::build_report(report_dir);
            evo::emit_report(table, report_dir);
            std::cout << table.to_text();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
