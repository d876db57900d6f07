// tssg_cli: simulate | track | sweep. Errors go to stderr as one JSON
// record and the exit code is nonzero (2 for usage and configuration
// problems, 1 for failures while running).

#include "tssg/tssg.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <vector>

namespace {

int report(const std::string& type, const std::string& message, int code,
           const std::string& field = {}, int line = 0) {
    tssg::Json err;
    err["type"] = type;
    err["message"] = message;
    if (!field.empty()) {
        err["field"] = field;
    }
    if (line > 0) {
        err["line"] = line;
    }
    std::cerr << tssg::Json{{"error", err}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-based multi-target signal strength tracking"};
    app.require_subcommand(1);

    tssg::CommandOptions opt;
    std::string out_dir;
    std::string tracker;
    std::string format = "csv";
    std::string sweep_param;
    std::vector<double> sweep_values;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", opt.seed, "override the master seed");
        sub->add_option("--runs", opt.runs, "override the Monte Carlo run count");
        sub->add_option("--tracker", tracker, "override the tracker kind")
            ->check(CLI::IsMember({"agnostic", "sparse_kf", "iekf", "hmm"}));
        sub->add_option("--format", format, "table format")
            ->check(CLI::IsMember({"csv", "json", "both"}));
    };
    CLI::App* simulate = app.add_subcommand("simulate", "write ground truth and measurements");
    common(simulate);
    CLI::App* track = app.add_subcommand("track", "run the tracking pipeline and Monte Carlo metrics");
    common(track);
    CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo metrics over a tracker parameter");
    common(sweep);
    sweep->add_option("--sweep-param", sweep_param, "alpha or sigma_k")->required();
    sweep->add_option("--sweep-values", sweep_values, "comma-separated parameter values")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage_error", e.what(), 2);
    }

    try {
        opt.out_dir = out_dir;
        if (!tracker.empty()) {
            opt.tracker = tssg::tracker_kind_from(tracker);
        }
        opt.format = format == "json"   ? tssg::OutputFormat::Json
                     : format == "both" ? tssg::OutputFormat::Both
                                        : tssg::OutputFormat::Csv;
        tssg::CommandResult result;
        if (simulate->parsed()) {
            result = tssg::cmd_simulate(opt);
        } else if (track->parsed()) {
            result = tssg::cmd_track(opt);
        } else {
            result = tssg::cmd_sweep(opt, tssg::sweep_param_from(sweep_param), sweep_values);
        }
        for (const auto& f : result.files) {
            std::cout << (std::filesystem::path(out_dir) / f).string() << "\n";
        }
        return 0;
    } catch (const tssg::ConfigError& e) {
        return report("config_error", e.what(), 2, e.field(), e.line());
    } catch (const tssg::InvalidArgument& e) {
        return report("invalid_argument", e.what(), 2);
    } catch (const std::exception& e) {
        return report("runtime_error", e.what(), 1);
    }
}
