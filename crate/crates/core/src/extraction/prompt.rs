use super::Review;

const INSTRUCTIONS: &str = "Perform aspect-based sentiment analysis for the restaurant review provided as the input. Return each aspect-sentiment pair with a label and a corresponding excerpt from the text. Also rate the sentiment of each aspect on a scale from 1-10 where 1 is highly negative and 10 is highly positive.

Aspect-sentiment pairs should not mix opinions on different aspects. Make sure to include all aspects. An aspect should be independent and not have to rely on other aspects to be understood.

If an opinion in the review is about the restaurant or experience in general then label this aspect as \u{201c}overall experience\u{201d}.  Opinions not related to the restaurant should not be included.";

const EXAMPLE_INPUT: &str = "I just left Mary\u{2019}s with my lovely wife. We had a very mixed experience. 3 out of 5 stars. The gorgeous outdoor patio seating was fantastic with a nice view of the ocean. First, we split a dozen oysters. They were the best I had in my life! FRESH! Delicious! The avocado toast was excellent as were the crab cakes. However, I absolutely hated the dessert we ordered and did not particularly like my cocktail. Also, the staff could have been a little friendlier.";

/// The worked example answer embedded in every prompt.
pub const PROMPT_EXAMPLE_OUTPUT: &str = r#"[["Overall experience","We had a very mixed experience. 3 out of 5 stars.",6],
["Outdoor patio seating","The gorgeous outdoor patio seating was fantastic with a nice view of the ocean",9],
["View","a nice view of the ocean",8],
["Oysters","we split a dozen oysters. They were the best I had in my life! FRESH! Delicious!",10],
["Avocado toast","the avocado toast was excellent",9],
["Crab cakes","the crab cakes were excellent",9],
["Dessert","I absolutely hated the dessert we ordered",1],
["Cocktail","I did not particularly like my cocktail",3],
["Staff friendliness","the staff could have been a little friendlier",4]]"#;

/// Fills the few-shot extraction template with one review.
pub fn build_prompt(review: &Review) -> String {
    format!(
        "{INSTRUCTIONS}\n\nExample input: {EXAMPLE_INPUT}\n\nExample output:\n{PROMPT_EXAMPLE_OUTPUT}\n\nInput: {}\n\nOutput:",
        review.text
    )
}
