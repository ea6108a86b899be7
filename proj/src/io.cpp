#include "plapflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace plapflow {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("write_trajectory_csv: cannot open " + path);
    const std::size_t cells = traj.states.empty() ? 0 : traj.states.front().size();
    out << "k,t,energy,inner_iterations";
    for (std::size_t c = 0; c < cells; ++c) out << ",v" << c;
    out << "\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        out << k << ',' << format_double(traj.times[k]) << ','
            << format_double(traj.energies[k]) << ','
            << (k == 0 ? 0 : traj.inner_iterations[k - 1]);
        const auto& vals = traj.states[k].values();
        for (Eigen::Index i = 0; i < vals.size(); ++i)
            out << ',' << format_double(vals[i]);
        out << "\n";
    }
    if (!out)
        throw IoError("write_trajectory_csv: write failed for " + path);
}

nlohmann::json schedule_json(const Schedule& sched) {
    nlohmann::json j;
    j["n"] = sched.n;
    j["kappa"] = sched.kappa;
    j["eps"] = sched.eps;
    j["tau"] = sched.tau;
    j["T"] = sched.T;
    j["N"] = sched.N;
    j["c_op"] = sched.c_op;
    nlohmann::json report = nlohmann::json::array();
    for (const auto& cond : sched.feasibility_report) {
        report.push_back({{"condition", cond.name},
                          {"satisfied", cond.satisfied},
                          {"margin", cond.margin}});
    }
    j["feasibility_report"] = report;
    return j;
}

nlohmann::json trajectory_summary_json(const Trajectory& traj) {
    nlohmann::json j;
    if (traj.schedule) j["schedule"] = schedule_json(*traj.schedule);
    j["steps"] = traj.states.empty() ? 0 : traj.states.size() - 1;
    if (!traj.states.empty()) {
        const CellFunction& last = traj.states.back();
        j["final_norms"] = {{"l1", last.lp_norm(1.0)},
                            {"l2", last.lp_norm(2.0)},
                            {"linf", last.linf_norm()}};
        j["final_energy"] = traj.energies.back();
        j["initial_energy"] = traj.energies.front();
        // Fitted decay constant of the energy gap against the final energy,
        // defined when the gap shrinks strictly: gap_k ~ gap_0 * exp(-c t_k).
        const double floor_e = traj.energies.back();
        const double gap0 = traj.energies.front() - floor_e;
        if (traj.energies.size() > 2 && gap0 > 0.0) {
            const std::size_t mid = traj.energies.size() / 2;
            const double gap_mid = traj.energies[mid] - floor_e;
            if (gap_mid > 0.0 && traj.times[mid] > 0.0)
                j["energy_decay_constant"] =
                    std::log(gap0 / gap_mid) / traj.times[mid];
        }
    }
    int total_inner = 0;
    for (int it : traj.inner_iterations) total_inner += it;
    j["total_inner_iterations"] = total_inner;
    return j;
}

void write_matrix_triplets_csv(const KernelMatrix& kmat, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("write_matrix_triplets_csv: cannot open " + path);
    nlohmann::json header;
    header["n"] = kmat.partition().cells_per_axis();
    header["d"] = kmat.partition().dim();
    header["origin"] = kmat.origin() == KernelMatrix::Origin::RandomGraph
                           ? "random_graph"
                           : "deterministic";
    if (kmat.graph_info()) {
        header["seed"] = kmat.graph_info()->seed;
        header["rho"] = kmat.graph_info()->rho;
    }
    out << "# " << header.dump() << "\n";
    out << "i,j,weight\n";
    const auto& m = kmat.matrix();
    for (Eigen::Index i = 0; i < m.outerSize(); ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it;
             ++it)
            if (it.col() >= i)
                out << i << ',' << it.col() << ',' << format_double(it.value()) << "\n";
    if (!out)
        throw IoError("write_matrix_triplets_csv: write failed for " + path);
}

std::vector<double> read_signal_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("read_signal_csv: cannot open " + path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double v;
        if (!(ss >> v))
            throw IoError("read_signal_csv: malformed line '" + line + "' in " + path);
        values.push_back(v);
    }
    if (values.empty())
        throw IoError("read_signal_csv: no samples in " + path);
    return values;
}

void write_signal_csv(const std::vector<double>& values, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("write_signal_csv: cannot open " + path);
    for (double v : values) out << format_double(v) << "\n";
    if (!out)
        throw IoError("write_signal_csv: write failed for " + path);
}

}  // namespace plapflow
