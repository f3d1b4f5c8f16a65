#include <httplib.h>

#include "chronomap/common/hash.hpp"
#include "chronomap/ingest/ingest.hpp"
#include "chronomap/geometry/io.hpp"

namespace chronomap::ingest {

HttpGazetteer::HttpGazetteer(std::string base_url, int timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::vector<GazetteerEntry> HttpGazetteer::candidates(const std::string& feature_class, geo::Point near,
                                                      double radius_m) {
    const auto [origin, prefix] = split_url(base_url_);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_s_);
    client.set_read_timeout(timeout_s_);
    const httplib::Params params{{"class", feature_class},
                                 {"x", geo::format_number(near.x)},
                                 {"y", geo::format_number(near.y)},
                                 {"radius", geo::format_number(radius_m)}};
    const auto res = client.Get(prefix + "/candidates", params, httplib::Headers{});
    if (!res) throw GazetteerError("gazetteer unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw GazetteerError("gazetteer answered HTTP " + std::to_string(res->status));
    try {
        return FixtureGazetteer::from_json(nlohmann::json::parse(res->body)).candidates(feature_class, near, radius_m);
    } catch (const std::exception& e) {
        throw GazetteerError(std::string("bad gazetteer response: ") + e.what());
    }
}

}  // namespace chronomap::ingest
