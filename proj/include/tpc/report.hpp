#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "tpc/training.hpp"

namespace tpc {

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Key-value text form of a TrainReport, one `key = value` per line:
///
///   linear.inverse_strength, linear.val_f1, linear.val_loss, linear.seconds
///   linear.sweep.<i>.{inverse_strength,val_f1,val_loss,epochs,grad_norm}
///   degree.<k>.{learning_rate,weight_decay,dropout_rate,val_f1,val_loss,seconds,epochs}
///   degree.<k>.cell.<c>.{learning_rate,weight_decay,dropout_rate,val_f1,val_loss}
///   truncation.<n>.{val_f1,val_accuracy,val_loss}
///
/// Lines starting with '#' are comments. Only the *.seconds keys vary between
/// identical runs.
inline void write_report_text(const TrainReport& r, std::ostream& os) {
    using detail::num;
    os << "# tpc train report, format 1\n";
    os << "degrees_trained = " << r.degrees.size() + 1 << "\n";
    os << "linear.inverse_strength = " << num(r.linear.inverse_strength) << "\n";
    os << "linear.val_f1 = " << num(r.linear.val_f1) << "\n";
    os << "linear.val_loss = " << num(r.linear.val_loss) << "\n";
    os << "linear.seconds = " << num(r.linear.seconds) << "\n";
    for (std::size_t i = 0; i < r.linear.sweep.size(); ++i) {
        const auto& s = r.linear.sweep[i];
        const std::string p = "linear.sweep." + std::to_string(i) + ".";
        os << p << "inverse_strength = " << num(s.inverse_strength) << "\n";
        os << p << "val_f1 = " << num(s.val_f1) << "\n";
        os << p << "val_loss = " << num(s.val_loss) << "\n";
        os << p << "epochs = " << s.epochs << "\n";
        os << p << "grad_norm = " << num(s.grad_norm) << "\n";
    }
    for (const auto& d : r.degrees) {
        const std::string p = "degree." + std::to_string(d.degree) + ".";
        os << p << "learning_rate = " << num(d.chosen.learning_rate) << "\n";
        os << p << "weight_decay = " << num(d.chosen.weight_decay) << "\n";
        os << p << "dropout_rate = " << num(d.chosen.dropout_rate) << "\n";
        os << p << "val_f1 = " << num(d.val_f1) << "\n";
        os << p << "val_loss = " << num(d.val_loss) << "\n";
        os << p << "seconds = " << num(d.seconds) << "\n";
        os << p << "epochs = " << (d.curve.empty() ? 0 : d.curve.size() - 1) << "\n";
        for (std::size_t c = 0; c < d.cells.size(); ++c) {
            const auto& cell = d.cells[c];
            const std::string q = p + "cell." + std::to_string(c) + ".";
            os << q << "learning_rate = " << num(cell.cell.learning_rate) << "\n";
            os << q << "weight_decay = " << num(cell.cell.weight_decay) << "\n";
            os << q << "dropout_rate = " << num(cell.cell.dropout_rate) << "\n";
            os << q << "val_f1 = " << num(cell.val_f1) << "\n";
            os << q << "val_loss = " << num(cell.val_loss) << "\n";
        }
    }
    for (const auto& t : r.truncations) {
        const std::string p = "truncation." + std::to_string(t.truncation) + ".";
        os << p << "val_f1 = " << num(t.val_f1) << "\n";
        os << p << "val_accuracy = " << num(t.val_accuracy) << "\n";
        os << p << "val_loss = " << num(t.val_loss) << "\n";
    }
}

/// Loss curves of the selected cell per degree: degree,epoch,train_loss,val_loss,learning_rate.
inline void write_loss_csv(const TrainReport& r, std::ostream& os) {
    using detail::num;
    os << "degree,epoch,train_loss,val_loss,learning_rate\n";
    for (const auto& d : r.degrees)
        for (const auto& e : d.curve)
            os << d.degree << "," << e.epoch << "," << num(e.train_loss) << "," << num(e.val_loss) << ","
               << num(e.learning_rate) << "\n";
}

} // namespace tpc
