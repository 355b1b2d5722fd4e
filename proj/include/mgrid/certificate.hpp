// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

namespace mgrid {

enum class CertificateKind { Passivity, Consensus, PowerSharing };

const char* to_string(CertificateKind kind);

/// Outcome of a certification run with its margin and supporting numbers.
struct Certificate {
    CertificateKind kind = CertificateKind::Passivity;
    bool pass = false;
    double margin = 0.0;
    std::string reason;
    std::map<std::string, double> values;
    std::map<std::string, std::vector<double>> series;
    std::vector<std::string> warnings;
};

} // namespace mgrid
